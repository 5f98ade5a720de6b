//! Invariant suites run by `xpilot selftest`.

use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xpilot_core::channel::{complex_gaussian, observe, solve_energy, ChannelRealization};
use xpilot_core::dd::{apply_path_operator, dzt, idzt, DdFrame, FrameConfig, TimeVector};
use xpilot_core::estimator::{beamform, estimate_path, profiles, template_gu, template_gv, SearchConfig};
use xpilot_core::oracle::Dense;
use xpilot_core::pilots::PilotScheme;
use xpilot_core::qam::Qam;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelftestOptions {
    /// Exponent sign of the reference DFT; `-1` is the forward transform.
    pub dft_sign: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self { dft_sign: -1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub outcome: Result<String, String>,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub suites: Vec<SuiteResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.outcome.is_ok())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            let (tag, detail) = match &s.outcome {
                Ok(d) => ("PASS", d),
                Err(d) => ("FAIL", d),
            };
            writeln!(
                f,
                "{tag} {:<12} {:>9.1} ms  {detail}",
                s.name,
                s.elapsed.as_secs_f64() * 1e3
            )?;
        }
        let failed = self.suites.iter().filter(|s| s.outcome.is_err()).count();
        write!(f, "{} suites, {failed} failed", self.suites.len())
    }
}

type Suite = fn(&SelftestOptions) -> Result<String, String>;

pub fn selftest() -> Report {
    selftest_with(&SelftestOptions::default())
}

pub fn selftest_with(opts: &SelftestOptions) -> Report {
    let suites: [(&'static str, Suite); 7] = [
        ("transforms", transforms),
        ("path-operator", path_operator),
        ("delay-lemma", delay_lemma),
        ("doppler-lemma", doppler_lemma),
        ("recovery", recovery),
        ("noise", noise),
        ("qam", qam),
    ];
    let suites = suites
        .into_iter()
        .map(|(name, run)| {
            let start = Instant::now();
            let outcome = run(opts);
            SuiteResult {
                name,
                outcome,
                elapsed: start.elapsed(),
            }
        })
        .collect();
    Report { suites }
}

fn frame(m: usize, n: usize) -> FrameConfig {
    FrameConfig::new(m, n, 30e3, m / 4, 5.9e9).expect("valid test frame")
}

fn random_vec(len: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..len).map(|_| complex_gaussian(rng, 1.0)).collect()
}

fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn check(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn transforms(opts: &SelftestOptions) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_round = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for (m, n) in [(8, 4), (4, 2), (64, 16)] {
        let cfg = frame(m, n);
        let x = random_vec(m * n, &mut rng);
        let f = DdFrame::from_vec(m, n, x.clone()).map_err(|e| e.to_string())?;
        let s = idzt(&f, &cfg).map_err(|e| e.to_string())?;
        let back = dzt(&s, &cfg).map_err(|e| e.to_string())?;
        worst_round = worst_round.max(max_err(back.as_vec(), &x));
        if m * n <= 32 {
            let inverse = Dense::dft_with_sign(n, opts.dft_sign).adjoint().kron(&Dense::identity(m));
            worst_oracle = worst_oracle.max(max_err(s.as_slice(), &inverse.apply(&x)));
            let forward = Dense::dft_with_sign(n, opts.dft_sign).kron(&Dense::identity(m));
            let y = dzt(&TimeVector::new(x.clone()), &cfg).map_err(|e| e.to_string())?;
            worst_oracle = worst_oracle.max(max_err(y.as_vec(), &forward.apply(&x)));
        }
    }
    check(
        worst_round <= 1e-10 && worst_oracle <= 1e-10,
        format!("round trip {worst_round:.1e}, dense oracle {worst_oracle:.1e}"),
    )
}

fn path_operator(_: &SelftestOptions) -> Result<String, String> {
    let cfg = frame(8, 4);
    let x = random_vec(32, &mut ChaCha8Rng::seed_from_u64(2));
    let mut worst = 0.0f64;
    for (l, k) in [(0.0, 0.0), (3.0, -1.0), (1.37, 0.62), (5.9, -1.8)] {
        let fast = apply_path_operator(&TimeVector::new(x.clone()), l, k, &cfg).map_err(|e| e.to_string())?;
        let dense = Dense::path_operator(&cfg, l, k).apply(&x);
        worst = worst.max(max_err(fast.as_slice(), &dense));
    }
    check(worst <= 1e-10, format!("max deviation {worst:.1e}"))
}

/// Noiseless pilot-only beamformed path and its integrated profiles.
fn pilot_only_profiles(cfg: &FrameConfig, alpha: Complex64, l: f64, k: f64) -> Result<(f64, TimeVector, Vec<Complex64>, Vec<Complex64>), String> {
    let scheme = PilotScheme::centered_cross(cfg);
    let alloc = solve_energy(10.0, 0.0, cfg.m, cfg.n, scheme.pilot_count(cfg), 1.0);
    let xp = scheme.pilot_matrix(cfg).map_err(|e| e.to_string())?;
    let x = xp.combine(alloc.ep.sqrt(), &DdFrame::for_config(cfg), 0.0).map_err(|e| e.to_string())?;
    let s = idzt(&x, cfg).map_err(|e| e.to_string())?;
    let h = apply_path_operator(&s, l, k, cfg).map_err(|e| e.to_string())?;
    let r = TimeVector::new(h.as_slice().iter().map(|v| v * alpha).collect());
    let p = profiles(&dzt(&r, cfg).map_err(|e| e.to_string())?);
    Ok((alloc.ep, r, p.u, p.v))
}

fn delay_lemma(_: &SelftestOptions) -> Result<String, String> {
    let cfg = frame(64, 16);
    let alpha = Complex64::new(0.7, -0.4);
    let mut worst = 0.0f64;
    for (l, k) in [(1.728, 0.8), (4.608, -1.82), (0.0, 0.0), (5.76, 1.3)] {
        let (ep, _, u, _) = pilot_only_profiles(&cfg, alpha, l, k)?;
        let g = template_gu(l, k, cfg.m / 2, &cfg);
        let scale = alpha * ep.sqrt();
        let diff: Vec<_> = u.iter().zip(&g).map(|(a, b)| a * cfg.n as f64 - scale * b).collect();
        worst = worst.max(norm(&diff) / (scale.norm() * norm(&g)));
    }
    check(worst <= 1e-9, format!("relative error {worst:.1e}"))
}

fn doppler_lemma(_: &SelftestOptions) -> Result<String, String> {
    let cfg = frame(64, 16);
    let alpha = Complex64::new(1.0, 0.0);
    let mut errors = Vec::new();
    for k in [0.0, 0.3] {
        let (ep, _, _, v) = pilot_only_profiles(&cfg, alpha, 2.4, k)?;
        let g = template_gv(k, cfg.n / 2, &cfg);
        let diff: Vec<_> = v.iter().zip(&g).map(|(a, b)| a * cfg.m as f64 - ep.sqrt() * b).collect();
        errors.push(norm(&diff) / (ep.sqrt() * norm(&g)));
    }
    check(
        errors[0] <= 1e-9 && errors[1] <= 0.05,
        format!("relative error {:.1e} at k = 0, {:.3} at k = 0.3", errors[0], errors[1]),
    )
}

fn recovery(_: &SelftestOptions) -> Result<String, String> {
    let cfg = frame(64, 16);
    let scheme = PilotScheme::centered_cross(&cfg);
    let search = SearchConfig::default();
    let alpha = Complex64::new(-0.3, 0.9);
    let mut worst = 0.0f64;
    for (l, k) in [(1.728, 1.37), (4.608, -0.82), (2.0, 0.0), (5.76, -1.82)] {
        let (ep, r, _, _) = pilot_only_profiles(&cfg, alpha, l, k)?;
        let alloc = solve_energy(10.0, 0.0, cfg.m, cfg.n, scheme.pilot_count(&cfg), 1.0);
        debug_assert_eq!(alloc.ep, ep);
        let est = estimate_path(&r, 0.0, &scheme, &alloc, &search, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((est.l_hat - l).abs()).max((est.k_hat - k).abs());
    }
    check(
        worst <= search.fine_step + 1e-9,
        format!("worst delay/Doppler error {worst:.4} bins"),
    )
}

fn noise(_: &SelftestOptions) -> Result<String, String> {
    let cfg = frame(64, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (antennas, sigma2) = (32, 1.0);
    let silent = TimeVector::zeros(cfg.cells());
    let mut total = 0.0;
    let mut count = 0usize;
    while count < 100_000 {
        let obs = observe(&silent, &ChannelRealization { paths: vec![] }, antennas, sigma2, &cfg, &mut rng)
            .map_err(|e| e.to_string())?;
        let r = beamform(&obs, 0.4);
        total += r.energy();
        count += r.len();
    }
    let ratio = total / count as f64 / (sigma2 / antennas as f64);
    check((ratio - 1.0).abs() <= 0.05, format!("variance ratio {ratio:.4} over {count} samples"))
}

fn qam(_: &SelftestOptions) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for order in [4, 16, 64] {
        let q = Qam::new(order).map_err(|e| e.to_string())?;
        let bits: Vec<u8> = (0..q.bits_per_symbol() * 512).map(|_| rng.random_range(0..2u8)).collect();
        let symbols = q.map(&bits).map_err(|e| e.to_string())?;
        if q.demap(&symbols) != bits {
            return Err(format!("{order}-QAM round trip failed"));
        }
        let energy = q.constellation().iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        if (energy - 1.0).abs() > 1e-12 {
            return Err(format!("{order}-QAM mean energy {energy}"));
        }
    }
    Ok("orders 4, 16, 64".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_build_passes() {
        let report = selftest();
        assert!(report.passed(), "{report}");
        assert_eq!(report.suites.len(), 7);
    }

    #[test]
    fn perturbed_dft_sign_fails() {
        let report = selftest_with(&SelftestOptions { dft_sign: 1.0 });
        assert!(!report.passed());
        let failed: Vec<_> = report.suites.iter().filter(|s| s.outcome.is_err()).map(|s| s.name).collect();
        assert_eq!(failed, ["transforms"]);
        assert!(report.to_string().contains("FAIL transforms"));
    }
}
