//! Flat `key = value` run configuration.
//!
//! Grammar: one `key = value` per line, `#` starts a comment, blank lines
//! are ignored. Lists are comma separated; bilinear regimes are written
//! `k/k1/k2`. Later assignments override earlier ones.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bob_core::estimates::Regime;
use bob_core::evolution::DuhamelRule;
use bob_core::{Error, Result};

/// Values that round-trip through the text format.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn format_value(&self) -> String;
}

macro_rules! scalar_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn format_value(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

scalar_value!(f64, usize, u64, i32, bool, String);

impl<T: ConfigValue> ConfigValue for Vec<T> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|p| T::parse_value(p.trim())).collect()
    }
    fn format_value(&self) -> String {
        self.iter().map(|v| v.format_value()).collect::<Vec<_>>().join(",")
    }
}

impl ConfigValue for Regime {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(format!("expected k/k1/k2, got '{s}'"));
        }
        let n = |p: &str| p.trim().parse::<i32>().map_err(|e| format!("{e}"));
        Ok(Regime { k: n(parts[0])?, k1: n(parts[1])?, k2: n(parts[2])? })
    }
    fn format_value(&self) -> String {
        format!("{}/{}/{}", self.k, self.k1, self.k2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    /// Gaussian of width `width` scaled to `H̃^0` norm `delta / 2`.
    Default,
    /// `amplitude e^{-(x / width)^2}`.
    Gaussian,
    /// Random Gaussian bump drawn from `seed`.
    Random,
    /// Random band-limited data on `|xi| <= xi_max`, scaled like `Default`.
    BandLimited,
    Zero,
}

impl ConfigValue for DataKind {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "default" => Ok(Self::Default),
            "gaussian" => Ok(Self::Gaussian),
            "random" => Ok(Self::Random),
            "band-limited" => Ok(Self::BandLimited),
            "zero" => Ok(Self::Zero),
            _ => Err(format!("unknown data kind '{s}' (default, gaussian, random, band-limited, zero)")),
        }
    }
    fn format_value(&self) -> String {
        match self {
            Self::Default => "default",
            Self::Gaussian => "gaussian",
            Self::Random => "random",
            Self::BandLimited => "band-limited",
            Self::Zero => "zero",
        }
        .into()
    }
}

impl ConfigValue for DuhamelRule {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exponential" => Ok(Self::Exponential),
            "simpson" => Ok(Self::Simpson),
            _ => Err(format!("unknown quadrature '{s}' (exponential, simpson)")),
        }
    }
    fn format_value(&self) -> String {
        match self {
            Self::Exponential => "exponential",
            Self::Simpson => "simpson",
        }
        .into()
    }
}

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $name:ident : $t:ty = $default:expr;)*) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $name: $t,)*
        }

        impl Default for RunConfig {
            fn default() -> Self {
                Self { $($name: $default,)* }
            }
        }

        impl RunConfig {
            /// Every key with its one-line description.
            pub const KEYS: &'static [(&'static str, &'static str)] = &[$((stringify!($name), concat!($($doc),*)),)*];

            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($name) => {
                        self.$name = <$t>::parse_value(value.trim())
                            .map_err(|e| Error::Config(format!("{key}: {e}")))?;
                    })*
                    _ => return Err(Error::Config(format!("unknown key '{key}'"))),
                }
                Ok(())
            }

            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$((stringify!($name), self.$name.format_value()),)*]
            }
        }
    };
}

run_config! {
    /// Half-length L of the spatial box [-L, L).
    half_length: f64 = 32.0;
    /// Number of spatial points N (power of two).
    points: usize = 256;
    /// Time horizon T in (0, 1].
    horizon: f64 = 1.0;
    /// Time step; must divide the horizon.
    dt: f64 = 0.00390625;
    /// Stored snapshot intervals.
    snapshots: usize = 64;
    /// Viscosity for solve and picard.
    epsilon: f64 = 0.01;
    /// Viscosities for sweep-epsilon and verify-linear.
    epsilons: Vec<f64> = vec![0.1, 0.03, 0.01, 0.003, 0.001, 0.0003, 0.0001];
    /// Regularity index for solve, sweep-epsilon and norms.
    sigma: f64 = 0.0;
    /// Regularity indices for the estimate studies.
    sigmas: Vec<f64> = vec![0.0, 1.0];
    /// Initial data: default, gaussian, random, band-limited or zero.
    data: DataKind = DataKind::Default;
    /// Amplitude of gaussian data.
    amplitude: f64 = 1.0;
    /// Width of gaussian and default data.
    width: f64 = bob_core::data::DEFAULT_WIDTH;
    /// Small-data radius; default data has refined norm delta / 2.
    delta: f64 = 0.05;
    /// Frequency cutoff of band-limited data.
    xi_max: f64 = 4.0;
    /// Seed of random data and study families.
    seed: u64 = 0;
    /// Picard iterations.
    iterations: usize = 8;
    /// Picard time quadrature: exponential or simpson.
    picard_rule: DuhamelRule = DuhamelRule::Exponential;
    /// Smallest frequency block with the Y_k component.
    k_y: i32 = 5;
    /// Estimate studies run by verify-linear: free, inhomogeneous, kernel, envelope.
    linear_studies: Vec<String> = vec!["free".into(), "inhomogeneous".into()];
    /// Family size for the linear studies.
    samples: usize = 20;
    /// Half-length of the space-time study box.
    st_half_length: f64 = 16.0;
    /// Spatial points of the space-time study box.
    st_points: usize = 128;
    /// First time node of the space-time study box.
    st_t0: f64 = -4.0;
    /// Time window of the space-time study box.
    st_window: f64 = 8.0;
    /// Time nodes of the space-time study box.
    st_times: usize = 2048;
    /// Frequency blocks of the kernel and envelope studies.
    kernel_ks: Vec<i32> = vec![4, 6, 8];
    /// Dyadic bilinear regimes k/k1/k2.
    regimes: Vec<Regime> = vec![
        Regime { k: 2, k1: 2, k2: 2 },
        Regime { k: 3, k1: 2, k2: 3 },
        Regime { k: 0, k1: 1, k2: 1 },
        Regime { k: 0, k1: 2, k2: 2 },
        Regime { k: 1, k1: 0, k2: 1 },
    ];
    /// Random blocks per bilinear regime.
    bilinear_samples: usize = 100;
    /// Largest modulation index of the bilinear blocks.
    max_j: i32 = 5;
    /// Random (u, v) pairs of the full bilinear study.
    pairs: usize = 50;
    /// Half-length of the bilinear box.
    bl_half_length: f64 = 8.0;
    /// Spatial points of the bilinear box.
    bl_points: usize = 128;
    /// First time node of the bilinear box.
    bl_t0: f64 = -4.0;
    /// Time window of the bilinear box.
    bl_window: f64 = 8.0;
    /// Time nodes of the bilinear box.
    bl_times: usize = 1024;
    /// Worker threads; 0 uses all cores.
    workers: usize = 0;
    /// Trajectory CSV read by norms; empty uses the configured data.
    input: String = String::new();
    /// Output directory.
    output: String = "out".into();
    /// Turn threshold failures into exit code 4.
    assert: bool = false;
    /// Largest allowed max-ratio spread across epsilon.
    max_spread: f64 = 3.0;
    /// Largest allowed |log-log slope| of ratios against epsilon.
    max_slope: f64 = 0.1;
    /// Allowed deviation of the inviscid rate from 1.
    slope_tolerance: f64 = 0.15;
    /// Smallest allowed R^2 of the inviscid fit.
    min_r2: f64 = 0.98;
    /// Largest allowed Picard contraction ratio.
    max_contraction: f64 = 0.8;
    /// Largest allowed ratio to the regime median.
    outlier_factor: f64 = 10.0;
    /// Largest allowed |rank correlation| with j1.
    max_rank_correlation: f64 = 0.3;
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{raw}'", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Commented listing of every key and its current value.
    pub fn documented(&self) -> String {
        let mut out = String::new();
        for ((k, v), (_, doc)) in self.entries().into_iter().zip(Self::KEYS) {
            let _ = writeln!(out, "# {}\n{k} = {v}", doc.trim());
        }
        out
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(&self.output)
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.half_length > 0.0 && self.half_length.is_finite()) {
            return bad(format!("half_length must be positive, got {}", self.half_length));
        }
        if !(self.delta > 0.0) || !(self.width > 0.0) || !(self.xi_max > 0.0) {
            return bad("delta, width and xi_max must be positive".into());
        }
        if self.epsilons.is_empty() {
            return bad("epsilons must not be empty".into());
        }
        if self.epsilons.iter().chain([&self.epsilon]).any(|e| !(0.0..=1.0).contains(e)) {
            return bad("viscosities must lie in [0, 1]".into());
        }
        if self.sigmas.is_empty() || self.sigmas.iter().chain([&self.sigma]).any(|s| !s.is_finite()) {
            return bad("sigmas must be a nonempty list of finite values".into());
        }
        if self.output.is_empty() {
            return bad("output must be set".into());
        }
        for s in &self.linear_studies {
            if !["free", "inhomogeneous", "kernel", "envelope"].contains(&s.as_str()) {
                return bad(format!("unknown linear study '{s}'"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("epsilons", "1, 0.5").unwrap();
        cfg.set("regimes", "2/2/2,0/1/1").unwrap();
        cfg.set("data", "band-limited").unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::parse(&cfg.documented()).unwrap(), cfg);
        assert_eq!(back.epsilons, vec![1.0, 0.5]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("nonsense").is_err());
        assert!(RunConfig::parse("points = many").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
        assert!(RunConfig::parse("regimes = 1/2").is_err());
        let mut c = RunConfig::parse("epsilon = 2 # too large").unwrap();
        assert!(c.validate().is_err());
        c.epsilon = 0.5;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn every_key_is_documented() {
        assert_eq!(RunConfig::KEYS.len(), RunConfig::default().entries().len());
        assert!(RunConfig::KEYS.iter().all(|(_, d)| !d.trim().is_empty()));
    }
}
