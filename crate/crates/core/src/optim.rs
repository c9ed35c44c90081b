//! Derivative-free minimizers for the sharpness probes: Nelder–Mead over a
//! box (2–3 parameters) and golden-section search (1 parameter). Both start
//! from fixed seeds, so probe results are reproducible run to run.

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub clamped: bool,
}

fn clamp_into(x: &mut [f64], lo: &[f64], hi: &[f64]) -> bool {
    let mut clamped = false;
    for i in 0..x.len() {
        if x[i] < lo[i] {
            x[i] = lo[i];
            clamped = true;
        }
        if x[i] > hi[i] {
            x[i] = hi[i];
            clamped = true;
        }
    }
    clamped
}

/// Nelder–Mead with the standard reflection/expansion/contraction/shrink
/// parameters, evaluation budget as the stopping rule, iterates clamped to
/// the box.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], budget: usize) -> MinimizeResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1 && budget >= 1);
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut clamped = false;
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        f(x)
    };

    // fixed seed simplex: x0 plus 20% box-size steps per coordinate
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let step = 0.2 * (hi[i] - lo[i]);
        v[i] = if v[i] + step <= hi[i] {
            v[i] + step
        } else {
            v[i] - step
        };
        simplex.push(v);
    }
    for v in &mut simplex {
        clamped |= clamp_into(v, lo, hi);
    }
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    for v in &simplex {
        if evals >= budget {
            break;
        }
        values.push(eval(v, &mut evals));
    }
    while values.len() < simplex.len() {
        values.push(f64::INFINITY);
    }

    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for d in 0..n {
                centroid[d] += simplex[i][d] / n as f64;
            }
        }
        let mut reflected = vec![0.0; n];
        for d in 0..n {
            reflected[d] = centroid[d] + alpha * (centroid[d] - simplex[worst][d]);
        }
        clamped |= clamp_into(&mut reflected, lo, hi);
        let fr = eval(&reflected, &mut evals);

        if fr < values[best] && evals < budget {
            let mut expanded = vec![0.0; n];
            for d in 0..n {
                expanded[d] = centroid[d] + gamma * (reflected[d] - centroid[d]);
            }
            clamped |= clamp_into(&mut expanded, lo, hi);
            let fe = eval(&expanded, &mut evals);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else if evals < budget {
            let mut contracted = vec![0.0; n];
            for d in 0..n {
                contracted[d] = centroid[d] + rho * (simplex[worst][d] - centroid[d]);
            }
            clamped |= clamp_into(&mut contracted, lo, hi);
            let fc = eval(&contracted, &mut evals);
            if fc < values[worst] {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                // shrink toward the best vertex
                let best_v = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for d in 0..n {
                        simplex[i][d] = best_v[d] + sigma * (simplex[i][d] - best_v[d]);
                    }
                    if evals >= budget {
                        break;
                    }
                    values[i] = eval(&simplex[i], &mut evals);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    MinimizeResult {
        x: simplex[best].clone(),
        value: values[best],
        evaluations: evals,
        clamped,
    }
}

/// Golden-section search on an interval.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, budget: usize) -> MinimizeResult
where
    F: FnMut(f64) -> f64,
{
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut evals = 0usize;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    evals += 2;
    while evals < budget {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    let (x, value) = if fc < fd { (c, fc) } else { (d, fd) };
    MinimizeResult {
        x: vec![x],
        value,
        evaluations: evals,
        clamped: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.2).powi(2);
        let r = nelder_mead(f, &[0.9, 0.9], &[-1.0, -1.0], &[1.0, 1.0], 120);
        assert!(r.value < 1e-5, "value {}", r.value);
        assert!((r.x[0] - 0.3).abs() < 1e-2);
        assert!((r.x[1] + 0.2).abs() < 1e-2);
    }

    #[test]
    fn respects_budget_and_determinism() {
        let count = std::cell::Cell::new(0usize);
        let f = |x: &[f64]| {
            count.set(count.get() + 1);
            x[0] * x[0]
        };
        let r1 = nelder_mead(f, &[0.8], &[-1.0], &[1.0], 30);
        assert!(count.get() <= 30);
        let r2 = nelder_mead(
            |x: &[f64]| x[0] * x[0],
            &[0.8],
            &[-1.0],
            &[1.0],
            30,
        );
        assert_eq!(r1.x, r2.x);
        assert_eq!(r1.value, r2.value);
    }

    #[test]
    fn golden_finds_min() {
        let r = golden_section(|x| (x - 1.7).powi(2) + 3.0, 0.0, 4.0, 40);
        assert!((r.x[0] - 1.7).abs() < 1e-4);
        assert!((r.value - 3.0).abs() < 1e-8);
    }
}
