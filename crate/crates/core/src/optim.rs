//! Derivative-free local minimisation (Nelder-Mead simplex).

/// Simplex search settings.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iters: usize,
    /// Stop when the spread of objective values across the simplex drops
    /// below this.
    pub ftol: f64,
    /// ...and the simplex diameter drops below this.
    pub xtol: f64,
    /// Edge length of the initial simplex.
    pub step: f64,
    /// Dimension-dependent coefficients (Gao & Han), better above ~5 dims.
    pub adaptive: bool,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            ftol: 1e-10,
            xtol: 1e-8,
            step: 0.5,
            adaptive: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub evals: usize,
    /// Tolerances met before the iteration cap.
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, x0: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let n = x0.len();
        assert!(n > 0, "empty starting point");
        let nf = n as f64;
        let (alpha, gamma, rho, shrink) = if self.adaptive {
            (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
        } else {
            (1.0, 2.0, 0.5, 0.5)
        };

        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for d in 0..n {
            let mut p = x0.to_vec();
            p[d] += self.step;
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();

        let mut iters = 0;
        let mut converged = false;
        let mut centroid = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut trial2 = vec![0.0; n];

        while iters < self.max_iters {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = values[n] - values[0];
            let diameter = simplex[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.ftol && diameter <= self.xtol {
                converged = true;
                break;
            }
            // Flat objective with a non-degenerate simplex cannot improve.
            if spread == 0.0 && values[0].is_finite() && iters > 0 && diameter <= self.xtol.sqrt() {
                converged = true;
                break;
            }
            iters += 1;

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for p in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(p) {
                    *c += x / nf;
                }
            }
            let worst = &simplex[n];
            for d in 0..n {
                trial[d] = centroid[d] + alpha * (centroid[d] - worst[d]);
            }
            let fr = eval(&trial, &mut evals);

            if fr < values[0] {
                for d in 0..n {
                    trial2[d] = centroid[d] + gamma * (trial[d] - centroid[d]);
                }
                let fe = eval(&trial2, &mut evals);
                if fe < fr {
                    simplex[n].copy_from_slice(&trial2);
                    values[n] = fe;
                } else {
                    simplex[n].copy_from_slice(&trial);
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n].copy_from_slice(&trial);
                values[n] = fr;
                continue;
            }
            // contraction, outside if the reflection helped at all
            let outside = fr < values[n];
            for d in 0..n {
                trial2[d] = if outside {
                    centroid[d] + rho * (trial[d] - centroid[d])
                } else {
                    centroid[d] + rho * (simplex[n][d] - centroid[d])
                };
            }
            let fc = eval(&trial2, &mut evals);
            if (outside && fc <= fr) || (!outside && fc < values[n]) {
                simplex[n].copy_from_slice(&trial2);
                values[n] = fc;
                continue;
            }
            let best = simplex[0].clone();
            for idx in 1..=n {
                for d in 0..n {
                    simplex[idx][d] = best[d] + shrink * (simplex[idx][d] - best[d]);
                }
                values[idx] = eval(&simplex[idx], &mut evals);
            }
        }

        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap();
        Minimum {
            x: simplex[best].clone(),
            f: values[best],
            iters,
            evals,
            converged,
        }
    }

    /// Repeats the search from its own optimum until a restart no longer
    /// improves the value. Collapsed simplices in higher dimensions often
    /// stall short of the minimum; a fresh simplex recovers.
    pub fn minimize_restarting<F>(&self, mut f: F, x0: &[f64], max_rounds: usize) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut best = self.minimize(&mut f, x0);
        let mut iters = best.iters;
        let mut evals = best.evals;
        for _ in 1..max_rounds.max(1) {
            let next = self.minimize(&mut f, &best.x);
            iters += next.iters;
            evals += next.evals;
            let improved = next.f < best.f - self.ftol;
            if next.f <= best.f {
                best = next;
            }
            if !improved {
                break;
            }
        }
        best.iters = iters;
        best.evals = evals;
        best
    }
}
