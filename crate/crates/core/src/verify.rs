//! Runtime oracle suite behind `qcnn verify`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ansatz::{first_column, param_gradient, AnsatzParams};
use crate::metrics::roc_auc;
use crate::nn::{self, Tensor2D};
use crate::qconv::{self, KeyTable};
use crate::qsim::{self, HadamardTest, ShotConfig, UnitaryCompletion};
use crate::smiles::{BesGrid, GRID_COLS, GRID_ROWS};

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Mutation fixture: the circuit under test uses `Rot(-alpha, beta,
    /// gamma)` while the analytic side keeps `alpha`. The circuit checks must
    /// then fail.
    pub perturb_rot_sign: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<34} {:>6} {:>12} {:>10}  result", "check", "cases", "max_error", "tolerance")?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<34} {:>6} {:>12.3e} {:>10.1e}  {}",
                c.name,
                c.cases,
                c.max_error,
                c.tolerance,
                if c.passed() { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn random_grid(rng: &mut ChaCha8Rng, density: f64) -> BesGrid {
    let mut g = BesGrid::empty();
    for r in 0..GRID_ROWS {
        for c in 0..GRID_COLS {
            if rng.gen_bool(density) {
                g.set(r, c, true);
            }
        }
    }
    g
}

fn circuit_theta(theta: &AnsatzParams, opts: &VerifyOptions) -> AnsatzParams {
    let mut t = theta.clone();
    if opts.perturb_rot_sign {
        for l in 0..t.layers() {
            for q in 0..t.qubits() {
                let i = t.index(l, q, 0);
                t.angles_mut()[i] = -t.angles_mut()[i];
            }
        }
    }
    t
}

fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d < 1e-9 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

type CheckOutcome = Result<CheckResult, Box<dyn std::error::Error + Send + Sync>>;

fn circuit_vs_analytic(rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> CheckOutcome {
    let mut max = 0.0f64;
    let cases = 200;
    for _ in 0..cases {
        let theta = AnsatzParams::random(3, 2, rng);
        let x = random_unit(rng, 4);
        let phi = first_column(&theta);
        let re: f64 = x.iter().zip(&phi).map(|(a, p)| a * p.re).sum();
        let im: f64 = x.iter().zip(&phi).map(|(a, p)| a * p.im).sum();
        let circuit = HadamardTest::new(&circuit_theta(&theta, opts));
        max = max
            .max((circuit.real(&x, &ShotConfig::Exact)? - re).abs())
            .max((circuit.imag(&x, &ShotConfig::Exact)? - im).abs());
    }
    Ok(CheckResult {
        name: "circuit_vs_analytic",
        cases,
        max_error: max,
        tolerance: 1e-10,
    })
}

fn swap_hadamard_identity(rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> CheckOutcome {
    let mut max = 0.0f64;
    let cases = 100;
    for _ in 0..cases {
        let theta = AnsatzParams::random(3, 2, rng);
        let x = random_unit(rng, 4);
        let circuit = HadamardTest::new(&circuit_theta(&theta, opts));
        let re = circuit.real(&x, &ShotConfig::Exact)?;
        let im = circuit.imag(&x, &ShotConfig::Exact)?;
        let phi = first_column(&theta);
        let xc: Vec<crate::C64> = x.iter().map(|&v| crate::C64::new(v, 0.0)).collect();
        let fid = qsim::swap_test_states(&xc, &phi, &ShotConfig::Exact)?;
        max = max.max((fid - (re * re + im * im)).abs());
    }
    Ok(CheckResult {
        name: "swap_hadamard_identity",
        cases,
        max_error: max,
        tolerance: 1e-9,
    })
}

fn completion_independence(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut max = 0.0f64;
    let cases = 100;
    for _ in 0..cases {
        let theta = AnsatzParams::random(3, 2, rng);
        let x = random_unit(rng, 4);
        let circuit = HadamardTest::new(&theta);
        let a = circuit.real_with_completion(&UnitaryCompletion::householder(&x)?, &ShotConfig::Exact)?;
        let b = circuit.real_with_completion(&UnitaryCompletion::gram_schmidt(&x)?, &ShotConfig::Exact)?;
        max = max.max((a - b).abs());
    }
    Ok(CheckResult {
        name: "completion_independence",
        cases,
        max_error: max,
        tolerance: 1e-12,
    })
}

fn parameter_shift(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut max = 0.0f64;
    let cases = 20;
    let h = 1e-5;
    for _ in 0..cases {
        let theta = AnsatzParams::random(3, 2, rng);
        let x = random_unit(rng, 4);
        let g = param_gradient(&x, &theta)?;
        for (i, gi) in g.iter().enumerate() {
            let f = |t: &AnsatzParams| qsim::hadamard_test_real(&x, t, &ShotConfig::Exact);
            let fd = (f(&theta.shifted(i, h))? - f(&theta.shifted(i, -h))?) / (2.0 * h);
            max = max.max(rel_err(fd, *gi));
        }
    }
    Ok(CheckResult {
        name: "parameter_shift_vs_finite_diff",
        cases,
        max_error: max,
        tolerance: 1e-5,
    })
}

fn classical_gradients(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut max = 0.0f64;
    let cases = 20;
    let h = 1e-5;
    let rand_t = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
        Tensor2D::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    };
    for case in 0..cases {
        let normalized = case % 2 == 0;
        let x = rand_t(rng, 5, 6)?;
        let w = rand_t(rng, 2, 2)?;
        let fwd = |w: &Tensor2D| {
            if normalized {
                nn::normalized_conv_forward(&x, w, 0.1)
            } else {
                nn::conv_forward(&x, w, 0.1)
            }
        };
        let up = rand_t(rng, 4, 5)?;
        let dot = |t: &Tensor2D| t.data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>();
        let g = if normalized {
            nn::normalized_conv_backward(&x, &w, &up)?
        } else {
            nn::conv_backward(&x, &w, &up)?
        };
        for i in 0..4 {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp.data_mut()[i] += h;
            wm.data_mut()[i] -= h;
            let fd = (dot(&fwd(&wp)?) - dot(&fwd(&wm)?)) / (2.0 * h);
            max = max.max(rel_err(fd, g.filter.data()[i]));
        }
        // dense layer
        let n_in = 6;
        let wd: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xd: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gd = nn::dense_backward(&wd, &xd, &[1.0])?;
        for i in 0..n_in {
            let (mut wp, mut wm) = (wd.clone(), wd.clone());
            wp[i] += h;
            wm[i] -= h;
            let fd = (nn::dense_forward(&wp, &[0.0], &xd)?[0] - nn::dense_forward(&wm, &[0.0], &xd)?[0])
                / (2.0 * h);
            max = max.max(rel_err(fd, gd.weights[i]));
        }
    }
    Ok(CheckResult {
        name: "classical_layer_gradients",
        cases,
        max_error: max,
        tolerance: 1e-5,
    })
}

fn dedup_equivalence(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut max = 0.0f64;
    let mut worst_calls = 0usize;
    let cases = 3;
    for _ in 0..cases {
        let g = random_grid(rng, 0.2);
        let theta = AnsatzParams::random(3, 2, rng);
        let fast = qconv::qconv_forward(&g, &theta, 0.05)?;
        let naive = qconv::qconv_forward_naive(&g, &theta, 0.05)?;
        for (a, b) in fast.output.data().iter().zip(naive.output.data()) {
            max = max.max((a - b).abs());
        }
        worst_calls = worst_calls.max(fast.circuit_evaluations);
    }
    // An over-budget forward pass counts as a failure.
    if worst_calls > 15 {
        max = f64::INFINITY;
    }
    Ok(CheckResult {
        name: "dedup_equivalence",
        cases,
        max_error: max,
        tolerance: 0.0,
    })
}

fn quantum_classical_identity(rng: &mut ChaCha8Rng, opts: &VerifyOptions) -> CheckOutcome {
    let mut max = 0.0f64;
    let cases = 5;
    for _ in 0..cases {
        let g = random_grid(rng, 0.2);
        let theta = AnsatzParams::random(3, 2, rng);
        let q = KeyTable::quantum(&circuit_theta(&theta, opts))?.forward(&qconv::patch_keys(&g), 0.0);
        let w: Vec<f64> = first_column(&theta).iter().map(|z| z.re).collect();
        let input = Tensor2D::from_vec(GRID_ROWS, GRID_COLS, g.to_dense())?;
        let c = nn::normalized_conv_forward(&input, &Tensor2D::from_vec(2, 2, w)?, 0.0)?;
        for (a, b) in q.data().iter().zip(c.data()) {
            max = max.max((a - b).abs());
        }
    }
    Ok(CheckResult {
        name: "quantum_classical_forward_identity",
        cases,
        max_error: max,
        tolerance: 1e-10,
    })
}

fn auc_oracle(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut max = 0.0f64;
    let cases = 50;
    for _ in 0..cases {
        let n = rng.gen_range(4..80);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..10u8))).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    num += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        max = max.max((roc_auc(&scores, &labels)? - num / den).abs());
    }
    Ok(CheckResult {
        name: "auc_vs_pairwise",
        cases,
        max_error: max,
        tolerance: 1e-12,
    })
}

/// Runs every check. Errors inside a check are reported as an infinite
/// error for that check.
pub fn run(opts: &VerifyOptions) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    type Check<'a> = (&'static str, Box<dyn FnMut(&mut ChaCha8Rng) -> CheckOutcome + 'a>);
    let checks: Vec<Check> = vec![
        ("circuit_vs_analytic", Box::new(|r| circuit_vs_analytic(r, opts))),
        ("swap_hadamard_identity", Box::new(|r| swap_hadamard_identity(r, opts))),
        ("completion_independence", Box::new(completion_independence)),
        ("parameter_shift_vs_finite_diff", Box::new(parameter_shift)),
        ("classical_layer_gradients", Box::new(classical_gradients)),
        ("dedup_equivalence", Box::new(dedup_equivalence)),
        ("quantum_classical_forward_identity", Box::new(|r| quantum_classical_identity(r, opts))),
        ("auc_vs_pairwise", Box::new(auc_oracle)),
    ];
    let results = checks
        .into_iter()
        .map(|(name, mut f)| {
            f(&mut rng).unwrap_or(CheckResult {
                name,
                cases: 0,
                max_error: f64::INFINITY,
                tolerance: 0.0,
            })
        })
        .collect();
    VerifyReport { checks: results }
}
