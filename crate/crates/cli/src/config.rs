//! Experiment configuration and constant overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use sparse_recovery::design::IdentParams;
use sparse_recovery::heavy_hitters::HhConfig;
use sparse_recovery::l2_weak::WeakParams;
use sparse_recovery::noise_tolerant::{NoisyParams, VotingParams};
use sparse_recovery::pipelines::{ForEachParams, PipelineParams};
use sparse_recovery::util::round_up_pow2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    GtList,
    GtExact,
    GtNoisyFp,
    GtVotingFn,
    GtForeach,
    Hh,
    HhEst,
    L2Weak,
    Verify,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::GtList => "gt-list",
            Scheme::GtExact => "gt-exact",
            Scheme::GtNoisyFp => "gt-noisy-fp",
            Scheme::GtVotingFn => "gt-voting-fn",
            Scheme::GtForeach => "gt-foreach",
            Scheme::Hh => "hh",
            Scheme::HhEst => "hh-est",
            Scheme::L2Weak => "l2-weak",
            Scheme::Verify => "verify",
        }
    }

    /// Keys accepted by `--const` for this scheme.
    pub fn const_keys(self) -> &'static [&'static str] {
        const IDENT: [&str; 4] = ["c", "c_l", "kappa_cap", "kappa"];
        match self {
            Scheme::GtList => &[IDENT[0], IDENT[1], IDENT[2], IDENT[3], "c1"],
            Scheme::GtExact => &[IDENT[0], IDENT[1], IDENT[2], IDENT[3], "c1", "c2", "c3", "ks"],
            Scheme::GtNoisyFp => &[IDENT[0], IDENT[1], IDENT[2], IDENT[3], "c_r", "reps", "race"],
            Scheme::GtVotingFn => &["c_v", "regime_c", "band_factor", "width_factor", "c2", "c3"],
            Scheme::GtForeach => &[IDENT[0], IDENT[1], IDENT[2], IDENT[3], "fe_c", "c_bands", "c_width"],
            Scheme::Hh | Scheme::HhEst => &[
                IDENT[0], IDENT[1], IDENT[2], IDENT[3], "filter_bands", "filter_width", "est_c2", "est_c3", "kappa_b",
                "skew", "probes",
            ],
            Scheme::L2Weak => &["weak_c", "c_t", "weak_kappa", "cs_c", "cs_buckets", "tail"],
            Scheme::Verify => &["c1", "ks", "list"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Distribution {
    #[value(name = "spikes+flat", alias = "spikes-flat")]
    #[serde(rename = "spikes+flat")]
    SpikesFlat,
    #[value(name = "zipf")]
    #[serde(rename = "zipf")]
    Zipf,
    #[value(name = "adversarial-fn")]
    #[serde(rename = "adversarial-fn")]
    AdversarialFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementKind {
    Uniform,
    /// False positives aimed at the siblings of true defectives.
    Adversarial,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    /// Rounded up to a power of two.
    pub n: u64,
    pub k: u64,
    pub n_requested: u64,
    pub k_requested: u64,
    pub trials: u64,
    pub seed: u64,
    /// False positives per level (noisy schemes).
    pub e0: Option<u64>,
    /// Total false negatives (voting scheme).
    pub e1: Option<u64>,
    pub placement: PlacementKind,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub consts: BTreeMap<String, f64>,
    pub dist: Distribution,
    pub stream_file: Option<PathBuf>,
    /// Record wall time per trial. Off by default so output is reproducible.
    pub timing: bool,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(scheme: Scheme, n: u64, k: u64) -> Result<Self> {
        if k == 0 || n == 0 || k > n {
            bail!("need 1 <= k <= n, got k = {k}, n = {n}");
        }
        let (k2, n2) = round_up_pow2(k, n);
        Ok(Self {
            scheme,
            n: n2,
            k: k2,
            n_requested: n,
            k_requested: k,
            trials: 100,
            seed: 0,
            e0: None,
            e1: None,
            placement: PlacementKind::Uniform,
            eps: 0.5,
            delta: 0.1,
            alpha: 0.5,
            consts: BTreeMap::new(),
            dist: Distribution::SpikesFlat,
            stream_file: None,
            timing: false,
            jobs: None,
        })
    }

    pub fn trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_const(mut self, key: &str, value: f64) -> Self {
        self.consts.insert(key.to_string(), value);
        self
    }

    pub fn log_n(&self) -> u32 {
        self.n.trailing_zeros()
    }

    pub fn log_k(&self) -> u32 {
        self.k.trailing_zeros()
    }

    /// `e0` with its scheme default: `k·log2 k` for the noisy scheme, 0 elsewhere.
    pub fn e0_or_default(&self) -> u64 {
        self.e0.unwrap_or(match self.scheme {
            Scheme::GtNoisyFp => self.k * self.log_k() as u64,
            _ => 0,
        })
    }

    /// `e1` with its scheme default: `2k` for the voting scheme, 0 elsewhere.
    pub fn e1_or_default(&self) -> u64 {
        self.e1.unwrap_or(match self.scheme {
            Scheme::GtVotingFn => 2 * self.k,
            _ => 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("--trials must be positive");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            bail!("--eps must lie in (0, 1)");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("--delta must lie in (0, 1)");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            bail!("--alpha must lie in (0, 1]");
        }
        let allowed = self.scheme.const_keys();
        if let Some(bad) = self.consts.keys().find(|key| !allowed.contains(&key.as_str())) {
            bail!("constant `{bad}` does not apply to {}; accepted: {}", self.scheme.name(), allowed.join(", "));
        }
        if self.stream_file.is_some() && !matches!(self.scheme, Scheme::Hh | Scheme::HhEst) {
            bail!("--stream-file only applies to the hh schemes");
        }
        Ok(())
    }
}

/// Parses `KEY=VAL` for `--const`.
pub fn parse_const(s: &str) -> Result<(String, f64)> {
    let (key, value) = s.split_once('=').with_context(|| format!("expected KEY=VAL, got `{s}`"))?;
    let value: f64 = value.trim().parse().with_context(|| format!("constant `{key}` needs a number, got `{value}`"))?;
    if !value.is_finite() {
        bail!("constant `{key}` must be finite");
    }
    Ok((key.trim().to_string(), value))
}

/// Typed reads of the override map.
pub struct Consts<'a> {
    map: &'a BTreeMap<String, f64>,
}

impl<'a> Consts<'a> {
    pub fn new(map: &'a BTreeMap<String, f64>) -> Self {
        Self { map }
    }

    pub fn f64(&self, key: &'static str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            Some(&v) if v > 0.0 => Ok(v),
            Some(&v) => bail!("constant `{key}` must be positive, got {v}"),
            None => Ok(default),
        }
    }

    pub fn u64(&self, key: &'static str, default: u64) -> Result<u64> {
        match self.map.get(key) {
            Some(&v) if v >= 1.0 && v.fract() == 0.0 => Ok(v as u64),
            Some(&v) => bail!("constant `{key}` must be a positive integer, got {v}"),
            None => Ok(default),
        }
    }

    pub fn opt_u64(&self, key: &'static str) -> Result<Option<u64>> {
        if self.map.contains_key(key) {
            self.u64(key, 0).map(Some)
        } else {
                Ok(None)
        }
    }

    /// 0/1 switch.
    pub fn flag(&self, key: &'static str, default: bool) -> Result<bool> {
        match self.map.get(key) {
            Some(&v) if v == 0.0 || v == 1.0 => Ok(v == 1.0),
            Some(&v) => bail!("constant `{key}` is a 0/1 switch, got {v}"),
            None => Ok(default),
        }
    }

    pub fn ident(&self) -> Result<IdentParams> {
        let d = IdentParams::default();
        Ok(IdentParams {
            c: self.u64("c", d.c)?,
            c_l: self.u64("c_l", d.c_l)?,
            kappa_cap: self.u64("kappa_cap", d.kappa_cap as u64)? as usize,
            kappa: self.opt_u64("kappa")?.map(|v| v as usize),
        })
    }

    pub fn pipeline(&self) -> Result<PipelineParams> {
        let d = PipelineParams::default();
        Ok(PipelineParams {
            ident: self.ident()?,
            c1: self.u64("c1", d.c1)?,
            c2: self.u64("c2", d.c2)?,
            c3: self.u64("c3", d.c3)?,
        })
    }

    pub fn foreach(&self) -> Result<ForEachParams> {
        let d = ForEachParams::default();
        Ok(ForEachParams {
            ident: self.ident()?,
            c: self.u64("fe_c", d.c)?,
            c_bands: self.u64("c_bands", d.c_bands)?,
            c_width: self.u64("c_width", d.c_width)?,
        })
    }

    pub fn noisy(&self) -> Result<NoisyParams> {
        let d = NoisyParams::default();
        let ident = self.ident()?;
        Ok(NoisyParams {
            c: ident.c,
            c_r: self.u64("c_r", d.c_r)?,
            c_l: ident.c_l,
            kappa_cap: ident.kappa_cap,
            kappa: ident.kappa,
            reps: self.opt_u64("reps")?.map(|v| v as usize),
        })
    }

    pub fn voting(&self) -> Result<VotingParams> {
        let d = VotingParams::default();
        Ok(VotingParams {
            c_v: self.u64("c_v", d.c_v)?,
            c: self.f64("regime_c", d.c)?,
            band_factor: self.u64("band_factor", d.band_factor)?,
            width_factor: self.u64("width_factor", d.width_factor)?,
            c2: self.u64("c2", d.c2)?,
            c3: self.u64("c3", d.c3)?,
        })
    }

    pub fn hh(&self, estimates: bool) -> Result<HhConfig> {
        let d = HhConfig::default();
        Ok(HhConfig {
            ident: self.ident()?,
            filter_bands: self.f64("filter_bands", d.filter_bands)?,
            filter_width: self.u64("filter_width", d.filter_width)?,
            estimates,
            est_c2: self.u64("est_c2", d.est_c2)?,
            est_c3: self.u64("est_c3", d.est_c3)?,
            kappa_b: self.f64("kappa_b", d.kappa_b)?,
        })
    }

    pub fn weak(&self) -> Result<WeakParams> {
        let d = WeakParams::default();
        Ok(WeakParams {
            c: self.f64("weak_c", d.c)?,
            c_t: self.f64("c_t", d.c_t)?,
            kappa: self.u64("weak_kappa", d.kappa as u64)? as usize,
            cs_c: self.f64("cs_c", d.cs_c)?,
            cs_buckets: self.u64("cs_buckets", d.cs_buckets)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_and_records_requested_sizes() {
        let c = ExperimentConfig::new(Scheme::GtList, 1000, 5).unwrap();
        assert_eq!((c.n, c.k, c.n_requested, c.k_requested), (1024, 8, 1000, 5));
        assert!(ExperimentConfig::new(Scheme::GtList, 4, 5).is_err());
        assert!(ExperimentConfig::new(Scheme::GtList, 4, 0).is_err());
    }

    #[test]
    fn scheme_defaults_for_noise() {
        let c = ExperimentConfig::new(Scheme::GtNoisyFp, 4096, 8).unwrap();
        assert_eq!(c.e0_or_default(), 24);
        let v = ExperimentConfig::new(Scheme::GtVotingFn, 1024, 16).unwrap();
        assert_eq!(v.e1_or_default(), 32);
        assert_eq!(c.e1_or_default(), 0);
    }

    #[test]
    fn const_parsing_and_checks() {
        assert_eq!(parse_const("c=8").unwrap(), ("c".to_string(), 8.0));
        assert!(parse_const("c").is_err());
        assert!(parse_const("c=x").is_err());
        let bad = ExperimentConfig::new(Scheme::GtList, 64, 2).unwrap().with_const("c_v", 2.0);
        assert!(bad.validate().is_err());
        let ok = ExperimentConfig::new(Scheme::GtList, 64, 2).unwrap().with_const("c", 8.0);
        ok.validate().unwrap();
        let consts = Consts::new(&ok.consts);
        assert_eq!(consts.ident().unwrap().c, 8);
        let frac = ExperimentConfig::new(Scheme::GtList, 64, 2).unwrap().with_const("c", 2.5);
        assert!(Consts::new(&frac.consts).ident().is_err());
    }
}
