//! Job-file schema.
//!
//! Every frequency in the file is an ordinary frequency in Hz and every time is in
//! seconds. [`parse_config`] converts frequencies to angular rates once; nothing
//! downstream multiplies by 2π again.

use std::path::PathBuf;

use catsim_core::analysis::GridSpec;
use catsim_core::hilbert::{
    cat_state, coherent_state, required_levels, Mode, Parity, QState, SpaceDims, DEFAULT_DIM_CAP,
};
use catsim_core::lindblad::{EvolveOptions, DEFAULT_BLOCK_CAP};
use catsim_core::model::{reset_memory_rate, CollapseFlags, PhysicalParams, TWO_PI};
use catsim_core::ode::OdeOptions;
use catsim_core::pulse::{Channel, HolonomicTimings, PulseSequence, Segment};
use catsim_core::Error as CoreError;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_N_BUF: usize = 4;
/// Upper bound on any sample, shot, trajectory or grid count in a job file.
pub const MAX_COUNT: usize = 1_000_000;

fn hz(x: f64) -> f64 {
    TWO_PI * x
}

/// A complex number written as `x`, `[re, im]` or `{"re": .., "im": ..}`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(from = "RawComplex")]
pub struct Cx(pub Complex64);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawComplex {
    Real(f64),
    Pair([f64; 2]),
    Parts {
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

impl From<RawComplex> for Cx {
    fn from(r: RawComplex) -> Self {
        Cx(match r {
            RawComplex::Real(x) => Complex64::new(x, 0.0),
            RawComplex::Pair([re, im]) => Complex64::new(re, im),
            RawComplex::Parts { re, im } => Complex64::new(re, im),
        })
    }
}

impl Default for Cx {
    fn default() -> Self {
        Cx(Complex64::new(0.0, 0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Evolve,
    Wigner,
    Gap,
    Bitflip,
    Semiclassical,
    Protocol,
    Fit,
    Readout,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::Evolve => "evolve",
            JobKind::Wigner => "wigner",
            JobKind::Gap => "gap",
            JobKind::Bitflip => "bitflip",
            JobKind::Semiclassical => "semiclassical",
            JobKind::Protocol => "protocol",
            JobKind::Fit => "fit",
            JobKind::Readout => "readout",
        }
    }
}

/// Device parameters as written in the job file (Hz). Defaults are the measured device.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsBlock {
    pub g2: Cx,
    pub kappa_b: f64,
    pub kappa_a: f64,
    pub n_th_mem: f64,
    pub n_th_buf: f64,
    pub delta_mem: f64,
    pub delta_buf: f64,
    pub g_l: f64,
    pub g_sp: f64,
    pub eta: f64,
    pub g_reset: f64,
    pub kerr_buf: f64,
}

impl Default for ParamsBlock {
    fn default() -> Self {
        let d = PhysicalParams::<f64>::device();
        let f = |w: f64| w / TWO_PI;
        ParamsBlock {
            g2: Cx(d.g2 / TWO_PI),
            kappa_b: f(d.kappa_b),
            kappa_a: f(d.kappa_a),
            n_th_mem: d.n_th_mem,
            n_th_buf: d.n_th_buf,
            delta_mem: f(d.delta_mem),
            delta_buf: f(d.delta_buf),
            g_l: f(d.g_l),
            g_sp: f(d.g_sp),
            eta: d.eta_het,
            g_reset: f(d.g_reset),
            kerr_buf: f(d.kerr_buf),
        }
    }
}

impl ParamsBlock {
    fn to_physical(&self) -> CliResult<PhysicalParams<f64>> {
        let p = PhysicalParams {
            g2: self.g2.0 * TWO_PI,
            kappa_b: hz(self.kappa_b),
            kappa_a: hz(self.kappa_a),
            n_th_mem: self.n_th_mem,
            n_th_buf: self.n_th_buf,
            delta_mem: hz(self.delta_mem),
            delta_buf: hz(self.delta_buf),
            g_l: hz(self.g_l),
            g_sp: hz(self.g_sp),
            eta_het: self.eta,
            g_reset: hz(self.g_reset),
            kerr_buf: hz(self.kerr_buf),
        };
        p.validate().map_err(|e| match e {
            CoreError::InvalidParameter { name, reason } => {
                let name = if name == "eta_het" {
                    "eta".to_string()
                } else {
                    name
                };
                CliError::config(format!("params.{name}"), reason)
            }
            other => CliError::config("params", other.to_string()),
        })?;
        Ok(p)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertBlock {
    /// Memory truncation; sized from the job's largest amplitude when absent.
    pub n_mem: Option<usize>,
    pub n_buf: Option<usize>,
    pub dim_cap: Option<usize>,
}

impl HilbertBlock {
    /// Truncation for states up to amplitude `amp`, unless fixed in the file.
    pub fn dims_for(&self, amp: f64) -> CliResult<SpaceDims> {
        let n_mem = self.n_mem.unwrap_or_else(|| required_levels(amp));
        let n_buf = self.n_buf.unwrap_or(DEFAULT_N_BUF);
        SpaceDims::with_cap(n_mem, n_buf, self.dim_cap.unwrap_or(DEFAULT_DIM_CAP))
            .map_err(|e| CliError::config("hilbert", e.to_string()))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Abort when the top two memory levels hold more than this population.
    pub leakage_error: Option<f64>,
    pub trace_tol: f64,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = EvolveOptions::<f64>::default();
        SolverBlock {
            rtol: d.ode.rtol,
            atol: d.ode.atol,
            h_max: d.ode.h_max,
            max_steps: d.ode.max_steps,
            leakage_error: d.leakage_error,
            trace_tol: d.trace_tol,
        }
    }
}

impl SolverBlock {
    pub fn ode(&self) -> OdeOptions<f64> {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            h_init: None,
            h_max: self.h_max,
            max_steps: self.max_steps,
        }
    }

    pub fn evolve(&self) -> EvolveOptions<f64> {
        EvolveOptions {
            ode: self.ode(),
            leakage_error: self.leakage_error,
            trace_tol: self.trace_tol,
            ..EvolveOptions::default()
        }
    }

    fn validate(&self) -> CliResult<()> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("trace_tol", self.trace_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(CliError::config(
                    format!("solver.{name}"),
                    "must lie in (0, 1)",
                ));
            }
        }
        if self.h_max.is_some_and(|h| !(h > 0.0)) {
            return Err(CliError::config("solver.h_max", "must be positive"));
        }
        if self.leakage_error.is_some_and(|x| !(x > 0.0)) {
            return Err(CliError::config("solver.leakage_error", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(CliError::config("solver.max_steps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollapseBlock {
    pub mem_loss: bool,
    pub mem_heat: bool,
    pub buf_loss: bool,
    pub buf_heat: bool,
    /// Reset pump amplitude relative to the one giving `params.g_reset`.
    pub reset_pump: f64,
}

impl Default for CollapseBlock {
    fn default() -> Self {
        CollapseBlock {
            mem_loss: true,
            mem_heat: true,
            buf_loss: true,
            buf_heat: true,
            reset_pump: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParitySpec {
    Even,
    Odd,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Fock { n: usize },
    Coherent { alpha: Cx },
    Cat { alpha: Cx, parity: ParitySpec },
    Thermal { n_th: f64 },
}

impl Default for StateSpec {
    fn default() -> Self {
        StateSpec::Fock { n: 0 }
    }
}

impl StateSpec {
    /// Rough amplitude used to size the memory truncation.
    pub fn amplitude(&self) -> f64 {
        match self {
            StateSpec::Fock { n } => (*n as f64).sqrt() + 1.0,
            StateSpec::Coherent { alpha } | StateSpec::Cat { alpha, .. } => alpha.0.norm(),
            StateSpec::Thermal { n_th } => 2.0 * n_th.max(0.0).sqrt() + 1.0,
        }
    }

    pub fn build(&self, dims: SpaceDims) -> catsim_core::Result<QState<f64>> {
        match self {
            StateSpec::Fock { n } => QState::fock(dims, *n, 0),
            StateSpec::Coherent { alpha } => coherent_state(alpha.0, dims, Mode::Mem),
            StateSpec::Cat { alpha, parity } => {
                let p = if *parity == ParitySpec::Even {
                    Parity::Even
                } else {
                    Parity::Odd
                };
                cat_state(alpha.0, p, dims)
            }
            StateSpec::Thermal { n_th } => {
                let n = dims.n_mem();
                let r = n_th / (1.0 + n_th);
                let w: Vec<f64> = (0..n).map(|k| r.powi(k as i32)).collect();
                let z: f64 = w.iter().sum();
                let rho = DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        Complex64::new(w[i] / z, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                QState::from_memory_density(dims, &rho)
            }
        }
    }

    fn validate(&self, field: &str) -> CliResult<()> {
        match self {
            StateSpec::Cat { alpha, .. } if alpha.0.norm() == 0.0 => Err(CliError::config(
                format!("{field}.alpha"),
                "a cat needs α ≠ 0",
            )),
            StateSpec::Thermal { n_th } if !(*n_th >= 0.0 && n_th.is_finite()) => Err(
                CliError::config(format!("{field}.n_th"), "must be non-negative"),
            ),
            StateSpec::Fock { n } if *n > DEFAULT_DIM_CAP => {
                Err(CliError::config(format!("{field}.n"), "too large"))
            }
            _ => Ok(()),
        }
    }
}

/// Observables recorded by `evolve`; the config string is also the CSV column name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    NMem,
    NBuf,
    Parity,
    Z,
    ReA,
    ImA,
    ReB,
    ImB,
    ReA2,
    ImA2,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::NMem => "n_mem",
            Observable::NBuf => "n_buf",
            Observable::Parity => "parity",
            Observable::Z => "z",
            Observable::ReA => "re_a",
            Observable::ImA => "im_a",
            Observable::ReB => "re_b",
            Observable::ImB => "im_b",
            Observable::ReA2 => "re_a2",
            Observable::ImA2 => "im_a2",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Master,
    Trajectories,
}

/// Constant stabilization towards `alpha` plus an optional memory drive `eps_z` (Hz).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveBlock {
    pub alpha: Cx,
    #[serde(default)]
    pub eps_z: Cx,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSpec {
    pub channel: Channel,
    pub t_start: f64,
    #[serde(default)]
    pub duration: f64,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Ordered segment list. Drive envelopes are in Hz; pumps are relative; displacements are amplitudes.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceBlock {
    pub segments: Vec<SegmentSpec>,
    pub total_time: Option<f64>,
}

impl SequenceBlock {
    fn to_angular(&mut self) {
        for s in &mut self.segments {
            if matches!(s.channel, Channel::BufferDrive | Channel::MemoryDrive) {
                s.re = hz(s.re);
                s.im = hz(s.im);
            }
        }
    }

    pub fn build(&self) -> catsim_core::Result<PulseSequence<f64>> {
        let segs = self
            .segments
            .iter()
            .map(|s| Segment::new(s.channel, s.t_start, s.duration, Complex64::new(s.re, s.im)))
            .collect();
        PulseSequence::new(segs, self.total_time)
    }

    /// Displacement amplitudes summed, for sizing the truncation.
    pub fn displacement_budget(&self) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.channel == Channel::MemoryDisplacement)
            .map(|s| Complex64::new(s.re, s.im).norm())
            .sum()
    }
}

fn default_points() -> usize {
    101
}

fn default_traj() -> usize {
    200
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveJob {
    #[serde(default)]
    pub initial: StateSpec,
    pub drive: Option<DriveBlock>,
    pub sequence: Option<SequenceBlock>,
    pub t_end: Option<f64>,
    #[serde(default = "default_points")]
    pub n_points: usize,
    pub observables: Vec<Observable>,
    /// Reference amplitude for `z`; defaults to the drive target.
    pub alpha_ref: Option<Cx>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_traj")]
    pub n_traj: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock {
            re_min: -3.0,
            re_max: 3.0,
            im_min: -3.0,
            im_max: 3.0,
            n_re: 61,
            n_im: 61,
        }
    }
}

impl GridBlock {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            re_min: self.re_min,
            re_max: self.re_max,
            im_min: self.im_min,
            im_max: self.im_max,
            n_re: self.n_re,
            n_im: self.n_im,
        }
    }

    /// Largest `|λ|` on the grid.
    pub fn reach(&self) -> f64 {
        let r = self.re_min.abs().max(self.re_max.abs());
        let i = self.im_min.abs().max(self.im_max.abs());
        r.hypot(i)
    }

    fn validate(&self, field: &str) -> CliResult<()> {
        if self.n_re.saturating_mul(self.n_im) > MAX_COUNT {
            return Err(CliError::config(field, "too many grid points"));
        }
        self.spec()
            .validate()
            .map_err(|e| CliError::config(field, e.to_string()))
    }
}

/// Stabilize from the given state towards `alpha` for `time` before sampling.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareBlock {
    pub alpha: Cx,
    pub time: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerJob {
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default)]
    pub grid: GridBlock,
    pub prepare: Option<PrepareBlock>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapJob {
    pub alphas: Vec<Cx>,
    pub block_cap: usize,
}

impl Default for GapJob {
    fn default() -> Self {
        GapJob {
            alphas: vec![Cx::default()],
            block_cap: DEFAULT_BLOCK_CAP,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn get(&self, i: usize) -> f64 {
        match self {
            OneOrMany::One(x) => *x,
            OneOrMany::Many(v) => v[i],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![*x],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_bitflip_points() -> usize {
    2001
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitflipJob {
    pub alpha_sq: Vec<f64>,
    /// Observation window, one value or one per `alpha_sq` entry.
    pub t_end: OneOrMany,
    #[serde(default = "default_traj")]
    pub n_traj: usize,
    #[serde(default = "default_bitflip_points")]
    pub n_points: usize,
    /// Factor applied to κ_a (loss and heating alike).
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default = "half")]
    pub band: f64,
}

fn default_samples() -> usize {
    400
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemiclassicalJob {
    pub alpha: Cx,
    #[serde(default)]
    pub eps_z: Cx,
    /// Initial points as `[Re a, Im a, Re b, Im b]`.
    pub starts: Vec<[f64; 4]>,
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

fn default_alpha1() -> f64 {
    1.6
}

fn default_alpha2() -> f64 {
    2.4
}

fn default_readout() -> f64 {
    1e-6
}

fn holonomic_grid() -> GridBlock {
    GridBlock {
        re_min: -2.0,
        re_max: 2.0,
        im_min: -2.0,
        im_max: 2.0,
        n_re: 21,
        n_im: 21,
    }
}

/// Overrides of the holonomic timings (seconds; `zeno_eps` in Hz).
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingsBlock {
    pub prep: Option<f64>,
    pub zeno_eps: Option<f64>,
    pub deflation: Option<f64>,
    pub inflation: Option<f64>,
    pub ringdown: Option<f64>,
    pub readout: Option<f64>,
}

impl TimingsBlock {
    pub fn apply(&self, mut t: HolonomicTimings<f64>) -> HolonomicTimings<f64> {
        t.prep = self.prep.unwrap_or(t.prep);
        t.zeno_eps = self.zeno_eps.unwrap_or(t.zeno_eps);
        t.deflation = self.deflation.unwrap_or(t.deflation);
        t.inflation = self.inflation.unwrap_or(t.inflation);
        t.ringdown = self.ringdown.unwrap_or(t.ringdown);
        t.readout = self.readout.unwrap_or(t.readout);
        t
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolJob {
    Holonomic {
        #[serde(default)]
        state: StateSpec,
        #[serde(default = "default_alpha1")]
        alpha1: f64,
        #[serde(default = "default_alpha2")]
        alpha2: f64,
        #[serde(default = "holonomic_grid")]
        grid: GridBlock,
        #[serde(default)]
        timings: TimingsBlock,
    },
    /// Zeno rotation of a stabilized cat under a memory drive of magnitude `eps_z` (Hz).
    Zeno {
        alpha: Cx,
        eps_z: f64,
        duration: f64,
        #[serde(default = "default_points")]
        n_points: usize,
        initial: Option<StateSpec>,
    },
    Deflation {
        alphas: Vec<Cx>,
        time: f64,
        #[serde(default = "default_readout")]
        readout: f64,
    },
    BitflipProbe {
        alpha: f64,
        alpha_prime: f64,
        stabilize: f64,
        ramp: f64,
        #[serde(default = "default_readout")]
        readout: f64,
        initial: Option<StateSpec>,
    },
    Sequence {
        segments: Vec<SegmentSpec>,
        total_time: Option<f64>,
        #[serde(default)]
        initial: StateSpec,
    },
}

/// Two columns of a CSV file, chosen by header name (first two columns by default).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesInput {
    pub input: PathBuf,
    pub x: Option<String>,
    pub y: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum FitJob {
    Exponential {
        input: PathBuf,
        x: Option<String>,
        y: Option<String>,
    },
    DampedCosine {
        input: PathBuf,
        x: Option<String>,
        y: Option<String>,
    },
    WignerCuts {
        mixture: SeriesInput,
        cat: SeriesInput,
        thermal: SeriesInput,
        #[serde(default = "default_cut_alpha")]
        alpha: f64,
        #[serde(default = "default_cut_nth")]
        n_th: f64,
    },
}

fn default_cut_alpha() -> f64 {
    2.0
}

fn default_cut_nth() -> f64 {
    0.1
}

fn default_shots() -> usize {
    2000
}

fn default_mean_photons() -> [f64; 2] {
    [0.0, 10.0]
}

fn default_t_int() -> f64 {
    10e-6
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutJob {
    #[serde(default = "default_mean_photons")]
    pub mean_photons: [f64; 2],
    #[serde(default = "default_t_int")]
    pub t_int: f64,
    #[serde(default = "default_shots")]
    pub n_shots: usize,
}

impl Default for ReadoutJob {
    fn default() -> Self {
        ReadoutJob {
            mean_photons: default_mean_photons(),
            t_int: default_t_int(),
            n_shots: default_shots(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Job {
    Evolve(EvolveJob),
    Wigner(WignerJob),
    Gap(GapJob),
    Bitflip(BitflipJob),
    Semiclassical(SemiclassicalJob),
    Protocol(ProtocolJob),
    Fit(FitJob),
    Readout(ReadoutJob),
}

impl Job {
    pub fn kind(&self) -> JobKind {
        match self {
            Job::Evolve(_) => JobKind::Evolve,
            Job::Wigner(_) => JobKind::Wigner,
            Job::Gap(_) => JobKind::Gap,
            Job::Bitflip(_) => JobKind::Bitflip,
            Job::Semiclassical(_) => JobKind::Semiclassical,
            Job::Protocol(_) => JobKind::Protocol,
            Job::Fit(_) => JobKind::Fit,
            Job::Readout(_) => JobKind::Readout,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    params: ParamsBlock,
    #[serde(default)]
    hilbert: HilbertBlock,
    #[serde(default)]
    solver: SolverBlock,
    #[serde(default)]
    collapse: CollapseBlock,
    job: JobKind,
    seed: Option<u64>,
    output: Option<PathBuf>,
    evolve: Option<EvolveJob>,
    wigner: Option<WignerJob>,
    gap: Option<GapJob>,
    bitflip: Option<BitflipJob>,
    semiclassical: Option<SemiclassicalJob>,
    protocol: Option<ProtocolJob>,
    fit: Option<FitJob>,
    readout: Option<ReadoutJob>,
}

/// A validated job with all rates in rad/s.
#[derive(Clone, Debug)]
pub struct JobConfig {
    pub params: PhysicalParams<f64>,
    pub hilbert: HilbertBlock,
    pub solver: SolverBlock,
    pub collapse: CollapseFlags<f64>,
    pub seed: u64,
    pub seed_from_default: bool,
    pub output: Option<PathBuf>,
    pub job: Job,
}

impl JobConfig {
    pub fn kind(&self) -> JobKind {
        self.job.kind()
    }
}

pub fn parse_config(text: &str) -> CliResult<JobConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path == "." {
            "<root>".to_string()
        } else {
            path
        };
        CliError::config(field, format!("{inner}"))
    })?;
    build(raw)
}

fn missing(kind: JobKind) -> CliError {
    CliError::config(
        kind.name(),
        format!("job `{}` needs a `{}` block", kind.name(), kind.name()),
    )
}

fn build(mut raw: RawConfig) -> CliResult<JobConfig> {
    let params = raw.params.to_physical()?;
    raw.solver.validate()?;
    if raw.hilbert.n_mem.is_some_and(|n| n < 2) || raw.hilbert.n_buf.is_some_and(|n| n < 2) {
        return Err(CliError::config("hilbert", "need n_mem ≥ 2 and n_buf ≥ 2"));
    }
    let c = &raw.collapse;
    if !(c.reset_pump >= 0.0 && c.reset_pump.is_finite()) {
        return Err(CliError::config(
            "collapse.reset_pump",
            "must be non-negative",
        ));
    }
    let reset = (c.reset_pump > 0.0)
        .then(|| reset_memory_rate(params.g_reset * c.reset_pump * c.reset_pump, params.kappa_b));
    let collapse = CollapseFlags {
        mem_loss: c.mem_loss,
        mem_heat: c.mem_heat,
        buf_loss: c.buf_loss,
        buf_heat: c.buf_heat,
        reset,
    };

    let kind = raw.job;
    let present = [
        (JobKind::Evolve, raw.evolve.is_some()),
        (JobKind::Wigner, raw.wigner.is_some()),
        (JobKind::Gap, raw.gap.is_some()),
        (JobKind::Bitflip, raw.bitflip.is_some()),
        (JobKind::Semiclassical, raw.semiclassical.is_some()),
        (JobKind::Protocol, raw.protocol.is_some()),
        (JobKind::Fit, raw.fit.is_some()),
        (JobKind::Readout, raw.readout.is_some()),
    ];
    if let Some((other, _)) = present.iter().find(|(k, p)| *p && *k != kind) {
        return Err(CliError::config(
            other.name(),
            format!("block given for a `{}` job", kind.name()),
        ));
    }
    let job = match kind {
        JobKind::Evolve => Job::Evolve(check_evolve(
            raw.evolve.take().ok_or_else(|| missing(kind))?,
        )?),
        JobKind::Wigner => Job::Wigner(check_wigner(
            raw.wigner.take().ok_or_else(|| missing(kind))?,
        )?),
        JobKind::Gap => Job::Gap(check_gap(raw.gap.take().unwrap_or_default())?),
        JobKind::Bitflip => Job::Bitflip(check_bitflip(
            raw.bitflip.take().ok_or_else(|| missing(kind))?,
        )?),
        JobKind::Semiclassical => Job::Semiclassical(check_semiclassical(
            raw.semiclassical.take().ok_or_else(|| missing(kind))?,
        )?),
        JobKind::Protocol => Job::Protocol(check_protocol(
            raw.protocol.take().ok_or_else(|| missing(kind))?,
        )?),
        JobKind::Fit => Job::Fit(check_fit(raw.fit.take().ok_or_else(|| missing(kind))?)?),
        JobKind::Readout => Job::Readout(check_readout(raw.readout.take().unwrap_or_default())?),
    };
    Ok(JobConfig {
        params,
        hilbert: raw.hilbert,
        solver: raw.solver,
        collapse,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        seed_from_default: raw.seed.is_none(),
        output: raw.output,
        job,
    })
}

fn positive(field: &str, x: f64) -> CliResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(field, "must be positive"))
    }
}

fn count(field: &str, n: usize, min: usize) -> CliResult<()> {
    if n < min {
        Err(CliError::config(field, format!("must be at least {min}")))
    } else if n > MAX_COUNT {
        Err(CliError::config(
            field,
            format!("must not exceed {MAX_COUNT}"),
        ))
    } else {
        Ok(())
    }
}

fn check_sequence(field: &str, s: &mut SequenceBlock) -> CliResult<()> {
    s.to_angular();
    s.build()
        .map_err(|e| CliError::config(field, e.to_string()))?;
    Ok(())
}

fn check_evolve(mut j: EvolveJob) -> CliResult<EvolveJob> {
    j.initial.validate("evolve.initial")?;
    if j.observables.is_empty() {
        return Err(CliError::config(
            "evolve.observables",
            "list at least one observable",
        ));
    }
    count("evolve.n_points", j.n_points, 2)?;
    count("evolve.n_traj", j.n_traj, 1)?;
    if j.drive.is_some() && j.sequence.is_some() {
        return Err(CliError::config(
            "evolve",
            "give either `drive` or `sequence`, not both",
        ));
    }
    if let Some(d) = &mut j.drive {
        d.eps_z = Cx(d.eps_z.0 * TWO_PI);
    }
    if let Some(s) = &mut j.sequence {
        check_sequence("evolve.sequence", s)?;
        if j.t_end.is_some() {
            return Err(CliError::config(
                "evolve.t_end",
                "the sequence fixes the duration",
            ));
        }
    } else {
        positive("evolve.t_end", j.t_end.unwrap_or(f64::NAN))?;
    }
    if j.observables.contains(&Observable::Z) {
        let r = j.alpha_ref.or_else(|| j.drive.as_ref().map(|d| d.alpha));
        if r.is_none_or(|a| a.0.norm() == 0.0) {
            return Err(CliError::config(
                "evolve.alpha_ref",
                "`z` needs a nonzero reference amplitude",
            ));
        }
    }
    Ok(j)
}

fn check_wigner(j: WignerJob) -> CliResult<WignerJob> {
    j.state.validate("wigner.state")?;
    j.grid.validate("wigner.grid")?;
    if let Some(p) = &j.prepare {
        positive("wigner.prepare.time", p.time)?;
    }
    Ok(j)
}

fn check_gap(j: GapJob) -> CliResult<GapJob> {
    if j.alphas.is_empty() {
        return Err(CliError::config(
            "gap.alphas",
            "list at least one amplitude",
        ));
    }
    count("gap.block_cap", j.block_cap, 1)?;
    Ok(j)
}

fn check_bitflip(j: BitflipJob) -> CliResult<BitflipJob> {
    if j.alpha_sq.is_empty() {
        return Err(CliError::config(
            "bitflip.alpha_sq",
            "list at least one value",
        ));
    }
    for (i, a) in j.alpha_sq.iter().enumerate() {
        positive(&format!("bitflip.alpha_sq[{i}]"), *a)?;
    }
    let t = j.t_end.values();
    if t.len() != 1 && t.len() != j.alpha_sq.len() {
        return Err(CliError::config(
            "bitflip.t_end",
            "give one value or one per alpha_sq entry",
        ));
    }
    for (i, x) in t.iter().enumerate() {
        positive(&format!("bitflip.t_end[{i}]"), *x)?;
    }
    count("bitflip.n_traj", j.n_traj, 1)?;
    count("bitflip.n_points", j.n_points, 8)?;
    if !(j.noise_scale >= 0.0 && j.noise_scale.is_finite()) {
        return Err(CliError::config(
            "bitflip.noise_scale",
            "must be non-negative",
        ));
    }
    if !(j.band > 0.0 && j.band < 1.0) {
        return Err(CliError::config("bitflip.band", "must lie in (0, 1)"));
    }
    Ok(j)
}

fn check_semiclassical(mut j: SemiclassicalJob) -> CliResult<SemiclassicalJob> {
    j.eps_z = Cx(j.eps_z.0 * TWO_PI);
    if j.starts.is_empty() {
        return Err(CliError::config(
            "semiclassical.starts",
            "list at least one initial point",
        ));
    }
    count("semiclassical.starts", j.starts.len(), 1)?;
    positive("semiclassical.t_end", j.t_end)?;
    count("semiclassical.n_samples", j.n_samples, 1)?;
    Ok(j)
}

fn check_protocol(mut j: ProtocolJob) -> CliResult<ProtocolJob> {
    match &mut j {
        ProtocolJob::Holonomic {
            state,
            alpha1,
            alpha2,
            grid,
            timings,
        } => {
            state.validate("protocol.state")?;
            positive("protocol.alpha1", *alpha1)?;
            positive("protocol.alpha2", *alpha2)?;
            grid.validate("protocol.grid")?;
            timings.zeno_eps = timings.zeno_eps.map(hz);
            for (name, v) in [
                ("prep", timings.prep),
                ("zeno_eps", timings.zeno_eps),
                ("deflation", timings.deflation),
                ("inflation", timings.inflation),
                ("readout", timings.readout),
            ] {
                if let Some(v) = v {
                    positive(&format!("protocol.timings.{name}"), v)?;
                }
            }
            if timings
                .ringdown
                .is_some_and(|r| !(r >= 0.0 && r.is_finite()))
            {
                return Err(CliError::config(
                    "protocol.timings.ringdown",
                    "must be non-negative",
                ));
            }
        }
        ProtocolJob::Zeno {
            alpha,
            eps_z,
            duration,
            n_points,
            initial,
        } => {
            if alpha.0.norm() == 0.0 {
                return Err(CliError::config("protocol.alpha", "must be nonzero"));
            }
            positive("protocol.eps_z", *eps_z)?;
            *eps_z = hz(*eps_z);
            positive("protocol.duration", *duration)?;
            count("protocol.n_points", *n_points, 2)?;
            if let Some(s) = initial {
                s.validate("protocol.initial")?;
            }
        }
        ProtocolJob::Deflation {
            alphas,
            time,
            readout,
        } => {
            if alphas.is_empty() {
                return Err(CliError::config(
                    "protocol.alphas",
                    "list at least one amplitude",
                ));
            }
            count("protocol.alphas", alphas.len(), 1)?;
            if !(*time >= 0.0 && time.is_finite()) {
                return Err(CliError::config("protocol.time", "must be non-negative"));
            }
            positive("protocol.readout", *readout)?;
        }
        ProtocolJob::BitflipProbe {
            alpha,
            alpha_prime,
            stabilize,
            ramp,
            readout,
            initial,
        } => {
            positive("protocol.alpha", *alpha)?;
            positive("protocol.alpha_prime", *alpha_prime)?;
            for (name, v) in [("stabilize", *stabilize), ("ramp", *ramp)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(CliError::config(
                        format!("protocol.{name}"),
                        "must be non-negative",
                    ));
                }
            }
            positive("protocol.readout", *readout)?;
            if let Some(s) = initial {
                s.validate("protocol.initial")?;
            }
        }
        ProtocolJob::Sequence {
            segments,
            total_time,
            initial,
        } => {
            initial.validate("protocol.initial")?;
            let mut s = SequenceBlock {
                segments: std::mem::take(segments),
                total_time: *total_time,
            };
            check_sequence("protocol", &mut s)?;
            *segments = s.segments;
        }
    }
    Ok(j)
}

fn check_fit(j: FitJob) -> CliResult<FitJob> {
    if let FitJob::WignerCuts { alpha, n_th, .. } = &j {
        positive("fit.alpha", *alpha)?;
        if !(*n_th >= 0.0 && n_th.is_finite()) {
            return Err(CliError::config("fit.n_th", "must be non-negative"));
        }
    }
    Ok(j)
}

fn check_readout(j: ReadoutJob) -> CliResult<ReadoutJob> {
    for (i, n) in j.mean_photons.iter().enumerate() {
        if !(*n >= 0.0 && n.is_finite()) {
            return Err(CliError::config(
                format!("readout.mean_photons[{i}]"),
                "must be non-negative",
            ));
        }
    }
    positive("readout.t_int", j.t_int)?;
    count("readout.n_shots", j.n_shots, 100)?;
    Ok(j)
}
