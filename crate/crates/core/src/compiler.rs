//! Encoding of non-negative linear-algebra problems into device
//! configurations, and decoding of drain flows back into numbers.
//!
//! A row `a` of a matrix becomes the coupling row of one mode: the baths
//! receive γ[κ][j] = Γ·â_j with â = a/Σa, and the drain receives
//! γ[κ][0] = ε·Σ_{j≥1} γ[κ][j]. The input vector `b` becomes bath
//! temperatures chosen so that n_j(ω_g, T_j) = b_j at the group base
//! frequency ω_g. Each mode's drain flow then reads out
//! (â·b) = −J[κ][0] / (ω_κ γ[κ][0]) up to an O(ε) error that
//! [`estimate_encoding_error`] bounds.
//!
//! Modes computing rows of the same matrix form a *group* of close
//! frequencies. They share the input only approximately; the layout keeps
//! the relative occupancy mismatch below `group_tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{
    bose_occupancy, inverse_temperature, stationary_flows, DeviceConfig, FlowReport, Mode,
    Reservoir, T_FLOOR,
};

/// Relative slack for floating-point rounding in the decode path.
const ROUNDING_SLACK: f64 = 1e-12;

/// Minimum ratio between the gap separating two groups and the wider of
/// their frequency spreads.
pub const GROUP_SEPARATION: f64 = 10.0;

const LAYOUT_BISECTION_STEPS: usize = 80;

/// Tunable knobs of the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingSettings {
    /// Base frequency ω_g of the (primary) mode group.
    pub base_frequency: f64,
    /// Drain ratio ε = γ[κ][0] / Σ_{j≥1} γ[κ][j].
    pub drain_ratio: f64,
    /// Total bath coupling Γ per mode. Cancels on decode.
    pub total_rate: f64,
    /// Allowed relative occupancy mismatch inside a group.
    pub group_tol: f64,
    /// Occupancy substituted for zero inputs.
    pub occupancy_floor: f64,
}

impl Default for EncodingSettings {
    fn default() -> Self {
        EncodingSettings {
            base_frequency: 1.0,
            drain_ratio: 1e-4,
            total_rate: 1.0,
            group_tol: 1e-3,
            occupancy_floor: 1e-12,
        }
    }
}

impl EncodingSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if !(self.base_frequency > 0.0 && self.base_frequency.is_finite()) {
            return bad(format!(
                "base_frequency must be positive, got {}",
                self.base_frequency
            ));
        }
        if !(self.drain_ratio > 0.0 && self.drain_ratio <= 0.01) {
            return bad(format!(
                "drain_ratio must lie in (0, 0.01], got {}",
                self.drain_ratio
            ));
        }
        if !(self.total_rate > 0.0 && self.total_rate.is_finite()) {
            return bad(format!(
                "total_rate must be positive, got {}",
                self.total_rate
            ));
        }
        if !(self.group_tol > 0.0 && self.group_tol <= 0.1) {
            return bad(format!(
                "group_tol must lie in (0, 0.1], got {}",
                self.group_tol
            ));
        }
        if !(self.occupancy_floor > 0.0 && self.occupancy_floor.is_finite()) {
            return bad(format!(
                "occupancy_floor must be positive, got {}",
                self.occupancy_floor
            ));
        }
        Ok(())
    }
}

/// A set of modes with close frequencies computing rows of one matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGroup {
    pub group_id: u32,
    /// Indices into the config's mode list, in row order.
    pub modes: Vec<usize>,
    pub base_frequency: f64,
    /// Largest relative frequency offset δ_max; modes sit at ω_g(1 + δ_κ)
    /// with δ_κ equispaced on [0, δ_max].
    pub spread: f64,
    /// True when the closeness tolerance could not be met with distinct
    /// frequencies and every mode was placed exactly at ω_g.
    pub degenerate: bool,
}

/// A device configuration plus everything needed to decode its flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledProgram {
    pub config: DeviceConfig,
    /// The first group is primary: bath temperatures were set at its base
    /// frequency.
    pub groups: Vec<ModeGroup>,
    pub drain_ratio: f64,
    /// Pre-normalization row sums, one per mode.
    pub row_scales: Vec<f64>,
    pub occupancy_floor: f64,
    pub group_tol: f64,
    /// (rows of the primary matrix, input dimension n).
    pub target_shape: (usize, usize),
    /// The input vector b as requested (before flooring).
    pub inputs: Vec<f64>,
}

/// Numbers read back from drain flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedResult {
    pub values: Vec<f64>,
    /// Drain flows J[κ][0] used, one per decoded mode in decode order.
    pub raw_flows: Vec<f64>,
    /// Per-entry bound on |value − exact answer|.
    pub error_bound: Vec<f64>,
}

/// One matrix to be placed at its own base frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub matrix: Vec<Vec<f64>>,
    pub base_frequency: f64,
}

/// Result of decoding a single group of a multi-group program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupProduct {
    pub group_id: u32,
    pub base_frequency: f64,
    /// Input vector the group actually multiplied: n(ω_g, T⃗) for secondary
    /// groups, the requested b for the primary one.
    pub input: Vec<f64>,
    pub result: DecodedResult,
}

impl CompiledProgram {
    /// Number of inputs n (baths, excluding the drain).
    pub fn input_len(&self) -> usize {
        self.target_shape.1
    }

    pub fn primary_group(&self) -> &ModeGroup {
        &self.groups[0]
    }

    /// Normalized bath weights â of one mode (drain excluded).
    pub fn normalized_row(&self, mode: usize) -> Vec<f64> {
        let baths = &self.config.couplings()[mode][1..];
        let total: f64 = baths.iter().sum();
        baths.iter().map(|g| g / total).collect()
    }

    /// Occupancies of the baths at `frequency` under the compiled temperatures.
    pub fn bath_occupancies(&self, frequency: f64) -> Result<Vec<f64>> {
        self.config.reservoirs()[1..]
            .iter()
            .map(|r| bose_occupancy(frequency, r.temperature))
            .collect()
    }

    /// Reference input of a group: b for the primary group, n(ω_g, T⃗)
    /// otherwise.
    fn reference_input(&self, group: usize) -> Result<Vec<f64>> {
        if group == 0 {
            Ok(self.inputs.clone())
        } else {
            self.bath_occupancies(self.groups[group].base_frequency)
        }
    }

    /// Check every invariant of a compiled program. Programs loaded from
    /// disk should pass through here before use.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let k = self.config.mode_count();
        let n = self.config.reservoir_count() - 1;
        if self.target_shape.1 != n || self.inputs.len() != n {
            return bad(format!(
                "program declares {} inputs but the device has {n} baths",
                self.inputs.len()
            ));
        }
        if self.row_scales.len() != k {
            return bad(format!(
                "{} row scales for {k} modes",
                self.row_scales.len()
            ));
        }
        if let Some(i) = self
            .row_scales
            .iter()
            .position(|s| !(*s > 0.0 && s.is_finite()))
        {
            return bad(format!("row scale {i} must be positive"));
        }
        if !(self.drain_ratio > 0.0) || !(self.occupancy_floor > 0.0) || !(self.group_tol > 0.0) {
            return bad("drain_ratio, occupancy_floor and group_tol must be positive".into());
        }
        if self.groups.is_empty() {
            return bad("program has no mode groups".into());
        }
        if self.target_shape.0 != self.groups[0].modes.len() {
            return bad("target shape does not match the primary group".into());
        }
        let mut seen = vec![false; k];
        for g in &self.groups {
            for &m in &g.modes {
                if m >= k || seen[m] {
                    return bad(format!("mode {m} missing or assigned to two groups"));
                }
                seen[m] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return bad("some modes belong to no group".into());
        }
        for (m, row) in self.config.couplings().iter().enumerate() {
            let baths: f64 = row[1..].iter().sum();
            if row[0] != self.drain_ratio * baths {
                return bad(format!(
                    "mode {m}: drain coupling {} != drain_ratio * {baths}",
                    row[0]
                ));
            }
        }
        for g in &self.groups {
            let reference = self.bath_occupancies(g.base_frequency)?;
            for &m in &g.modes {
                let here = self.bath_occupancies(self.config.frequency(m))?;
                for (j, (x, r)) in here.iter().zip(&reference).enumerate() {
                    if (x - r).abs() > self.group_tol * r {
                        return bad(format!(
                            "mode {m} violates group closeness at bath {}: {x} vs {r}",
                            j + 1
                        ));
                    }
                }
            }
        }
        check_group_separation(&self.config, &self.groups)
    }
}

fn check_input_vector(b: &[f64]) -> Result<()> {
    if b.is_empty() {
        return Err(Error::InvalidProblem("input vector is empty".into()));
    }
    if let Some(j) = b.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidProblem(format!(
            "input vector entry {j} must be finite and non-negative, got {}",
            b[j]
        )));
    }
    Ok(())
}

fn check_nonneg_matrix(matrix: &[Vec<f64>], n: usize) -> Result<()> {
    if matrix.is_empty() {
        return Err(Error::InvalidProblem("matrix has no rows".into()));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidProblem(format!(
                "row {i} has {} entries, the input vector has {n}",
                row.len()
            )));
        }
        if let Some(j) = row.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidProblem(format!(
                "entry [{i}][{j}] must be finite and non-negative, got {}",
                row[j]
            )));
        }
        if row.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidProblem(format!("row {i} is all zero")));
        }
    }
    Ok(())
}

/// Largest relative deviation |n_j(ω_g(1+δ)) − n_j(ω_g)| / n_j(ω_g) over baths.
fn relative_occupancy_shift(base: f64, delta: f64, temperatures: &[f64]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &t in temperatures {
        let reference = bose_occupancy(base, t)?;
        if reference == 0.0 {
            continue;
        }
        let shifted = bose_occupancy(base * (1.0 + delta), t)?;
        worst = worst.max((shifted - reference).abs() / reference);
    }
    Ok(worst)
}

/// Relative offsets δ_κ for `count` modes around `base`, the spread δ_max,
/// and whether the degenerate fallback was taken.
fn layout_group(
    base: f64,
    count: usize,
    temperatures: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, f64, bool)> {
    if count == 1 {
        return Ok((vec![0.0], 0.0, false));
    }
    // the shift grows monotonically with δ, so bisect on the boundary
    let target = tol * (1.0 - 1e-9);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if relative_occupancy_shift(base, hi, temperatures)? <= target {
        lo = hi;
    } else {
        for _ in 0..LAYOUT_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if relative_occupancy_shift(base, mid, temperatures)? <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let step = lo / (count - 1) as f64;
    if base * (1.0 + step) == base {
        log::warn!(
            "group at base frequency {base}: closeness tolerance {tol} leaves no room for \
             distinct frequencies; placing {count} degenerate modes"
        );
        return Ok((vec![0.0; count], 0.0, true));
    }
    let offsets = (0..count).map(|i| step * i as f64).collect();
    Ok((offsets, lo, false))
}

fn group_width(config: &DeviceConfig, group: &ModeGroup) -> f64 {
    let freqs = group.modes.iter().map(|&m| config.frequency(m));
    let max = freqs.clone().fold(f64::MIN, f64::max);
    let min = freqs.fold(f64::MAX, f64::min);
    max - min
}

/// Groups must sit at distinct base frequencies, separated by at least
/// [`GROUP_SEPARATION`] times the wider spread of each adjacent pair.
fn check_group_separation(config: &DeviceConfig, groups: &[ModeGroup]) -> Result<()> {
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        groups[a]
            .base_frequency
            .total_cmp(&groups[b].base_frequency)
    });
    for pair in order.windows(2) {
        let (lo, hi) = (&groups[pair[0]], &groups[pair[1]]);
        let lo_top = lo
            .modes
            .iter()
            .map(|&m| config.frequency(m))
            .fold(f64::MIN, f64::max);
        let hi_bottom = hi
            .modes
            .iter()
            .map(|&m| config.frequency(m))
            .fold(f64::MAX, f64::min);
        let gap = hi_bottom - lo_top;
        let width = group_width(config, lo).max(group_width(config, hi));
        if !(gap > 0.0) || gap < GROUP_SEPARATION * width {
            return Err(Error::InvalidProblem(format!(
                "groups {} (ω = {}) and {} (ω = {}) overlap: gap {gap:e} is below {} x spread {width:e}",
                lo.group_id, lo.base_frequency, hi.group_id, hi.base_frequency, GROUP_SEPARATION
            )));
        }
    }
    Ok(())
}

/// Encode several matrices sharing one input vector. Bath temperatures are
/// set from `b` at the first group's base frequency; every further group
/// multiplies the functionally dependent vector n(ω_g, T⃗).
pub fn encode_groups(
    specs: &[GroupSpec],
    b: &[f64],
    settings: &EncodingSettings,
) -> Result<CompiledProgram> {
    settings.validate()?;
    check_input_vector(b)?;
    if specs.is_empty() {
        return Err(Error::InvalidProblem("no matrices to encode".into()));
    }
    let n = b.len();
    for (g, spec) in specs.iter().enumerate() {
        check_nonneg_matrix(&spec.matrix, n)
            .map_err(|e| Error::InvalidProblem(format!("group {g}: {e}")))?;
        if !(spec.base_frequency > 0.0 && spec.base_frequency.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "group {g}: base frequency must be positive, got {}",
                spec.base_frequency
            )));
        }
    }

    let primary = specs[0].base_frequency;
    let bath_temperatures = b
        .iter()
        .map(|&x| inverse_temperature(primary, x.max(settings.occupancy_floor)))
        .collect::<Result<Vec<f64>>>()?;
    let mut reservoirs = Vec::with_capacity(n + 1);
    reservoirs.push(Reservoir::drain(T_FLOOR));
    reservoirs.extend(bath_temperatures.iter().map(|&t| Reservoir::bath(t)));

    let mut modes = Vec::new();
    let mut couplings = Vec::new();
    let mut row_scales = Vec::new();
    let mut groups = Vec::with_capacity(specs.len());
    for (g, spec) in specs.iter().enumerate() {
        let group_id = g as u32;
        let (offsets, spread, degenerate) = layout_group(
            spec.base_frequency,
            spec.matrix.len(),
            &bath_temperatures,
            settings.group_tol,
        )?;
        let first = modes.len();
        for (row, delta) in spec.matrix.iter().zip(offsets) {
            let scale: f64 = row.iter().sum();
            let mut gammas = Vec::with_capacity(n + 1);
            gammas.push(0.0);
            gammas.extend(row.iter().map(|a| settings.total_rate * (a / scale)));
            let baths: f64 = gammas[1..].iter().sum();
            gammas[0] = settings.drain_ratio * baths;
            modes.push(Mode::new(spec.base_frequency * (1.0 + delta), group_id));
            couplings.push(gammas);
            row_scales.push(scale);
        }
        groups.push(ModeGroup {
            group_id,
            modes: (first..modes.len()).collect(),
            base_frequency: spec.base_frequency,
            spread,
            degenerate,
        });
    }

    let config = DeviceConfig::new(modes, reservoirs, couplings)?;
    check_group_separation(&config, &groups)?;
    let program = CompiledProgram {
        config,
        groups,
        drain_ratio: settings.drain_ratio,
        row_scales,
        occupancy_floor: settings.occupancy_floor,
        group_tol: settings.group_tol,
        target_shape: (specs[0].matrix.len(), n),
        inputs: b.to_vec(),
    };
    debug_assert!(program.validate().is_ok());
    Ok(program)
}

/// Encode the product P·b of a non-negative matrix (rows auto-normalized)
/// with a non-negative vector as one group at `settings.base_frequency`.
pub fn encode_matvec(
    matrix: &[Vec<f64>],
    b: &[f64],
    settings: &EncodingSettings,
) -> Result<CompiledProgram> {
    encode_groups(
        &[GroupSpec {
            matrix: matrix.to_vec(),
            base_frequency: settings.base_frequency,
        }],
        b,
        settings,
    )
}

/// Encode the scalar product a·b on a single mode.
pub fn encode_scalar_product(
    a: &[f64],
    b: &[f64],
    settings: &EncodingSettings,
) -> Result<CompiledProgram> {
    if a.len() != b.len() {
        return Err(Error::InvalidProblem(format!(
            "vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    check_input_vector(a)?;
    if a.iter().all(|x| *x == 0.0) {
        return Err(Error::InvalidProblem("weight vector a is all zero".into()));
    }
    encode_matvec(&[a.to_vec()], b, settings)
}

/// Per-mode bound on |decoded − exact|, in config mode order.
///
/// With â the normalized row, r the reference input of the mode's group and
/// s the row scale, the decode returns s·(Σ â n(ω_κ) − n_0)/(1+ε). The
/// bound adds, all multiplied by s:
///
/// * `ε/(1+ε) · Σ â r`: bath weight lost to the drain coupling;
/// * `group_tol · Σ â n(ω_g)`: occupancy shift of an off-base mode;
/// * `Σ â max(floor − r, 0)`: zero inputs raised to the occupancy floor;
/// * `n_0(ω_κ, T_0)`: residual drain occupancy;
/// * a 1e-12 relative rounding allowance.
pub fn estimate_encoding_error(program: &CompiledProgram) -> Result<Vec<f64>> {
    let eps = program.drain_ratio;
    let mut bounds = vec![0.0; program.config.mode_count()];
    for (gi, group) in program.groups.iter().enumerate() {
        let reference = program.reference_input(gi)?;
        let at_base = program.bath_occupancies(group.base_frequency)?;
        for &m in &group.modes {
            let weights = program.normalized_row(m);
            let dot = |v: &[f64]| -> f64 { weights.iter().zip(v).map(|(p, x)| p * x).sum() };
            let ideal = dot(&reference);
            let base_dot = dot(&at_base);
            let drain_term = eps / (1.0 + eps) * ideal;
            let group_term = if program.config.frequency(m) != group.base_frequency {
                program.group_tol * base_dot
            } else {
                0.0
            };
            let floor_term = if gi == 0 {
                weights
                    .iter()
                    .zip(&reference)
                    .map(|(p, r)| p * (program.occupancy_floor - r).max(0.0))
                    .sum()
            } else {
                0.0
            };
            let residual_drain = program.config.occupancy(m, 0)?;
            let rounding = ROUNDING_SLACK * ideal.max(base_dot);
            bounds[m] = program.row_scales[m]
                * (drain_term + group_term + floor_term + residual_drain + rounding);
        }
    }
    Ok(bounds)
}

fn check_flows_match(program: &CompiledProgram, flows: &FlowReport) -> Result<()> {
    let k = program.config.mode_count();
    let width = program.config.reservoir_count();
    if flows.per_channel.len() != k || flows.per_channel.iter().any(|r| r.len() != width) {
        return Err(Error::InvalidConfig(format!(
            "flow table shape does not match the program ({k} x {width})"
        )));
    }
    Ok(())
}

/// Read one mode's value: s·(−J[κ][0] / (ω_κ γ[κ][0])).
fn decode_mode(program: &CompiledProgram, flows: &FlowReport, mode: usize) -> Result<(f64, f64)> {
    let gamma0 = program.config.couplings()[mode][0];
    if gamma0 == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "mode {mode} has no drain coupling; the readout is undefined"
        )));
    }
    let drain_flow = flows.per_channel[mode][0];
    let value =
        program.row_scales[mode] * (-drain_flow / (program.config.frequency(mode) * gamma0));
    if !value.is_finite() {
        return Err(Error::Numerical(format!(
            "mode {mode} decoded to a non-finite value"
        )));
    }
    Ok((value, drain_flow))
}

fn decode_group(
    program: &CompiledProgram,
    flows: &FlowReport,
    group: usize,
    bounds: &[f64],
) -> Result<DecodedResult> {
    let modes = &program.groups[group].modes;
    let mut result = DecodedResult {
        values: Vec::with_capacity(modes.len()),
        raw_flows: Vec::with_capacity(modes.len()),
        error_bound: Vec::with_capacity(modes.len()),
    };
    for &m in modes {
        let (value, raw) = decode_mode(program, flows, m)?;
        result.values.push(value);
        result.raw_flows.push(raw);
        result.error_bound.push(bounds[m]);
    }
    Ok(result)
}

/// Decode the primary group into the m-vector P·b.
pub fn decode_matvec(program: &CompiledProgram, flows: &FlowReport) -> Result<DecodedResult> {
    check_flows_match(program, flows)?;
    let bounds = estimate_encoding_error(program)?;
    decode_group(program, flows, 0, &bounds)
}

/// Decode a single-mode program into the scalar a·b.
pub fn decode_scalar_product(
    program: &CompiledProgram,
    flows: &FlowReport,
) -> Result<DecodedResult> {
    if program.primary_group().modes.len() != 1 {
        return Err(Error::InvalidProblem(format!(
            "scalar decode needs a one-mode program, got {} modes",
            program.primary_group().modes.len()
        )));
    }
    decode_matvec(program, flows)
}

/// Decode every group of a program. Each group's result is the product of
/// its matrix with the input it actually saw (see [`GroupProduct::input`]).
pub fn parallel_group_products(
    program: &CompiledProgram,
    flows: &FlowReport,
) -> Result<Vec<GroupProduct>> {
    check_flows_match(program, flows)?;
    check_group_separation(&program.config, &program.groups)?;
    let bounds = estimate_encoding_error(program)?;
    (0..program.groups.len())
        .map(|g| {
            Ok(GroupProduct {
                group_id: program.groups[g].group_id,
                base_frequency: program.groups[g].base_frequency,
                input: program.reference_input(g)?,
                result: decode_group(program, flows, g, &bounds)?,
            })
        })
        .collect()
}

/// Split a signed matrix into non-negative parts with `matrix = plus − minus`.
pub fn split_signed(matrix: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let plus = matrix
        .iter()
        .map(|row| row.iter().map(|&a| if a > 0.0 { a } else { 0.0 }).collect())
        .collect();
    let minus = matrix
        .iter()
        .map(|row| {
            row.iter()
                .map(|&a| if a < 0.0 { -a } else { 0.0 })
                .collect()
        })
        .collect();
    (plus, minus)
}

/// The non-zero rows of one sign part, compiled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedPart {
    pub program: CompiledProgram,
    /// Row of the signed matrix computed by each primary-group mode.
    pub rows: Vec<usize>,
}

/// A signed matrix-vector product compiled as two non-negative products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedProgram {
    pub rows: usize,
    pub positive: Option<SignedPart>,
    pub negative: Option<SignedPart>,
}

impl SignedProgram {
    pub fn parts(&self) -> impl Iterator<Item = &SignedPart> {
        self.positive.iter().chain(self.negative.iter())
    }
}

fn compile_part(
    part: &[Vec<f64>],
    b: &[f64],
    settings: &EncodingSettings,
) -> Result<Option<SignedPart>> {
    let rows: Vec<usize> = (0..part.len())
        .filter(|&i| part[i].iter().any(|x| *x != 0.0))
        .collect();
    if rows.is_empty() {
        return Ok(None);
    }
    let matrix: Vec<Vec<f64>> = rows.iter().map(|&i| part[i].clone()).collect();
    Ok(Some(SignedPart {
        program: encode_matvec(&matrix, b, settings)?,
        rows,
    }))
}

pub fn compile_signed(
    matrix: &[Vec<f64>],
    b: &[f64],
    settings: &EncodingSettings,
) -> Result<SignedProgram> {
    settings.validate()?;
    check_input_vector(b)?;
    if matrix.is_empty() {
        return Err(Error::InvalidProblem("matrix has no rows".into()));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != b.len() {
            return Err(Error::InvalidProblem(format!(
                "row {i} has {} entries, the input vector has {}",
                row.len(),
                b.len()
            )));
        }
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "entry [{i}][{j}] is not finite"
            )));
        }
        if row.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidProblem(format!("row {i} is all zero")));
        }
    }
    let (plus, minus) = split_signed(matrix);
    Ok(SignedProgram {
        rows: matrix.len(),
        positive: compile_part(&plus, b, settings)?,
        negative: compile_part(&minus, b, settings)?,
    })
}

/// Decode a signed program given the stationary flows of each compiled part.
pub fn decode_signed(
    program: &SignedProgram,
    positive_flows: Option<&FlowReport>,
    negative_flows: Option<&FlowReport>,
) -> Result<DecodedResult> {
    let mut out = DecodedResult {
        values: vec![0.0; program.rows],
        raw_flows: Vec::new(),
        error_bound: vec![0.0; program.rows],
    };
    for (part, flows, sign) in [
        (&program.positive, positive_flows, 1.0),
        (&program.negative, negative_flows, -1.0),
    ] {
        let Some(part) = part else { continue };
        let flows = flows.ok_or_else(|| {
            Error::InvalidProblem("missing flows for a compiled sign part".into())
        })?;
        let decoded = decode_matvec(&part.program, flows)?;
        for (slot, &row) in part.rows.iter().enumerate() {
            out.values[row] += sign * decoded.values[slot];
            out.error_bound[row] += decoded.error_bound[slot];
        }
        out.raw_flows.extend(decoded.raw_flows);
    }
    Ok(out)
}

/// Full signed pipeline: split, compile both parts, simulate, subtract.
pub fn signed_matvec(
    matrix: &[Vec<f64>],
    b: &[f64],
    settings: &EncodingSettings,
) -> Result<DecodedResult> {
    let program = compile_signed(matrix, b, settings)?;
    let flows_of = |part: &Option<SignedPart>| -> Result<Option<FlowReport>> {
        part.as_ref()
            .map(|p| stationary_flows(&p.program.config))
            .transpose()
    };
    let plus = flows_of(&program.positive)?;
    let minus = flows_of(&program.negative)?;
    decode_signed(&program, plus.as_ref(), minus.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::coupling_weights;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn run(matrix: &[Vec<f64>], b: &[f64], settings: &EncodingSettings) -> DecodedResult {
        let program = encode_matvec(matrix, b, settings).unwrap();
        let flows = stationary_flows(&program.config).unwrap();
        decode_matvec(&program, &flows).unwrap()
    }

    fn assert_within_bound(decoded: &DecodedResult, expected: &[f64]) {
        for ((v, e), bound) in decoded
            .values
            .iter()
            .zip(expected)
            .zip(&decoded.error_bound)
        {
            assert!((v - e).abs() <= *bound, "|{v} - {e}| > {bound}");
        }
    }

    #[test]
    fn scalar_product_encoding_matches_hand_substitution() {
        let settings = EncodingSettings::default();
        let p = encode_scalar_product(&[0.3, 0.7], &[1.0, 2.0], &settings).unwrap();
        let row = &p.config.couplings()[0];
        assert_relative_eq!(row[0], 1e-4, max_relative = 1e-15);
        assert_relative_eq!(row[1], 0.3, max_relative = 1e-15);
        assert_relative_eq!(row[2], 0.7, max_relative = 1e-15);
        let temps: Vec<f64> = p
            .config
            .reservoirs()
            .iter()
            .map(|r| r.temperature)
            .collect();
        assert_eq!(temps[0], T_FLOOR);
        assert_relative_eq!(temps[1], 1.0 / LN_2, max_relative = 1e-15);
        assert_relative_eq!(temps[2], 1.0 / 1.5_f64.ln(), max_relative = 1e-15);
        assert_eq!(p.row_scales, vec![1.0]);
    }

    #[test]
    fn scalar_product_end_to_end() {
        let settings = EncodingSettings::default();
        let p = encode_scalar_product(&[0.3, 0.7], &[1.0, 2.0], &settings).unwrap();
        let flows = stationary_flows(&p.config).unwrap();
        let d = decode_scalar_product(&p, &flows).unwrap();
        assert_within_bound(&d, &[1.7]);
        assert!(d.error_bound[0] <= 2e-4 * 1.7 + 1e-10);
    }

    #[test]
    fn basis_vector_selects_entry() {
        let settings = EncodingSettings::default();
        let p = encode_scalar_product(&[1.0, 0.0], &[4.2, 9.0], &settings).unwrap();
        let w = coupling_weights(&p.config, 0).unwrap();
        assert!(w[0] < 1e-3 && w[2] == 0.0 && (w[1] - 1.0).abs() < 1e-3);
        let flows = stationary_flows(&p.config).unwrap();
        let d = decode_scalar_product(&p, &flows).unwrap();
        assert_within_bound(&d, &[4.2]);
    }

    #[test]
    fn unnormalized_weights_record_row_scale() {
        let settings = EncodingSettings::default();
        let p = encode_scalar_product(&[2.0, 2.0], &[1.0, 3.0], &settings).unwrap();
        assert_eq!(p.row_scales, vec![4.0]);
        assert_eq!(p.normalized_row(0), vec![0.5, 0.5]);
        let flows = stationary_flows(&p.config).unwrap();
        assert_within_bound(&decode_scalar_product(&p, &flows).unwrap(), &[8.0]);
    }

    #[test]
    fn zero_input_decodes_near_zero() {
        let settings = EncodingSettings::default();
        let d = run(&[vec![0.25, 0.25, 0.5]], &[0.0, 0.0, 0.0], &settings);
        assert!(d.values[0].abs() <= 3.0 * settings.occupancy_floor);
        assert_within_bound(&d, &[0.0]);
    }

    #[test]
    fn constant_input_decodes_to_constant() {
        let settings = EncodingSettings::default();
        for c in [0.1, 1.0, 10.0] {
            let d = run(&[vec![0.5, 0.5]], &[c, c], &settings);
            assert_within_bound(&d, &[c]);
            assert_relative_eq!(d.values[0], c, max_relative = 2e-4);
        }
    }

    #[test]
    fn scalar_encoding_rejects_bad_input() {
        let s = EncodingSettings::default();
        assert!(encode_scalar_product(&[0.0, 0.0], &[1.0, 1.0], &s).is_err());
        assert!(encode_scalar_product(&[-1.0, 2.0], &[1.0, 1.0], &s).is_err());
        assert!(encode_scalar_product(&[1.0, 2.0], &[1.0, -1.0], &s).is_err());
        assert!(encode_scalar_product(&[1.0], &[1.0, 1.0], &s).is_err());
        let wide = EncodingSettings {
            drain_ratio: 0.02,
            ..s
        };
        assert!(encode_scalar_product(&[1.0, 2.0], &[1.0, 1.0], &wide).is_err());
    }

    #[test]
    fn ideal_limit_bound_is_floor_only() {
        let s = EncodingSettings {
            drain_ratio: 1e-300,
            ..EncodingSettings::default()
        };
        let p = encode_scalar_product(&[0.5, 0.5], &[0.0, 0.0], &s).unwrap();
        let bound = estimate_encoding_error(&p).unwrap()[0];
        assert_relative_eq!(bound, s.occupancy_floor, max_relative = 1e-9);
    }

    #[test]
    fn bound_at_default_epsilon() {
        let s = EncodingSettings::default();
        let b = [0.0, 0.5, 1.0, 2.0];
        let p = encode_scalar_product(&[1.0, 1.0, 1.0, 1.0], &b, &s).unwrap();
        let bound = estimate_encoding_error(&p).unwrap()[0];
        // row_scale 4, ε/(1+ε) * mean(b) * 4 plus floors
        assert!(
            bound <= 2e-4 * 4.0 + 4.0 * s.occupancy_floor + 1e-11,
            "{bound}"
        );
    }

    #[test]
    fn matvec_two_by_two() {
        let s = EncodingSettings::default();
        let p = encode_matvec(&[vec![0.5, 0.5], vec![0.2, 0.8]], &[1.0, 2.0], &s).unwrap();
        assert_eq!(p.config.mode_count(), 2);
        assert_eq!(p.config.reservoir_count(), 3);
        p.validate().unwrap();
        let flows = stationary_flows(&p.config).unwrap();
        let d = decode_matvec(&p, &flows).unwrap();
        assert_within_bound(&d, &[1.5, 1.8]);
    }

    #[test]
    fn selection_rows_reproduce_input() {
        let s = EncodingSettings::default();
        let b = [3.0, 0.25, 7.5];
        let rows = vec![
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        let d = run(&rows, &b, &s);
        assert_within_bound(&d, &[7.5, 3.0, 0.25]);
    }

    #[test]
    fn uniform_row_averages() {
        let s = EncodingSettings::default();
        let b = [0.5, 1.5, 2.0, 4.0];
        let d = run(&[vec![0.25; 4]], &b, &s);
        assert_within_bound(&d, &[2.0]);
    }

    #[test]
    fn one_row_matvec_equals_scalar_pipeline() {
        let s = EncodingSettings::default();
        let a = [0.2, 0.3, 0.5];
        let b = [1.0, 0.1, 6.0];
        let p1 = encode_scalar_product(&a, &b, &s).unwrap();
        let p2 = encode_matvec(&[a.to_vec()], &b, &s).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn group_layout_respects_tolerance_and_is_one_sided() {
        let s = EncodingSettings::default();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0 + i as f64, 1.0, 2.0]).collect();
        let p = encode_matvec(&rows, &[1e-6, 1.0, 10.0], &s).unwrap();
        p.validate().unwrap();
        let g = p.primary_group();
        assert!(g.spread > 0.0 && !g.degenerate);
        let freqs: Vec<f64> = g.modes.iter().map(|&m| p.config.frequency(m)).collect();
        assert_eq!(freqs[0], s.base_frequency);
        assert!(freqs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn compiled_rows_reproduce_normalized_matrix() {
        let s = EncodingSettings::default();
        let rows = vec![vec![1.0, 3.0, 0.0], vec![2.0, 2.0, 4.0]];
        let p = encode_matvec(&rows, &[1.0, 2.0, 3.0], &s).unwrap();
        for (m, row) in rows.iter().enumerate() {
            let total: f64 = row.iter().sum();
            let w = coupling_weights(&p.config, m).unwrap();
            assert!((w[0] - s.drain_ratio / (1.0 + s.drain_ratio)).abs() < 1e-15);
            for (j, a) in row.iter().enumerate() {
                assert!((w[j + 1] * (1.0 + s.drain_ratio) - a / total).abs() < 1e-12);
                assert!((p.normalized_row(m)[j] - a / total).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matvec_rejects_zero_row() {
        let s = EncodingSettings::default();
        assert!(encode_matvec(&[vec![0.0, 0.0]], &[1.0, 1.0], &s).is_err());
        assert!(encode_matvec(&[vec![1.0, 0.0], vec![0.0]], &[1.0, 1.0], &s).is_err());
    }

    #[test]
    fn validate_catches_tampering() {
        let s = EncodingSettings::default();
        let mut p = encode_matvec(&[vec![0.5, 0.5]], &[1.0, 2.0], &s).unwrap();
        p.row_scales[0] = 0.0;
        assert!(p.validate().is_err());
        let mut p = encode_matvec(&[vec![0.5, 0.5]], &[1.0, 2.0], &s).unwrap();
        p.drain_ratio *= 2.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn signed_examples() {
        let s = EncodingSettings::default();
        let d = signed_matvec(&[vec![0.5, -0.5]], &[2.0, 2.0], &s).unwrap();
        assert!(d.values[0].abs() <= d.error_bound[0]);

        let d = signed_matvec(&[vec![1.0, -1.0]], &[3.0, 1.0], &s).unwrap();
        assert!((d.values[0] - 2.0).abs() <= d.error_bound[0]);
    }

    #[test]
    fn signed_with_empty_negative_row() {
        let s = EncodingSettings::default();
        let a = vec![vec![0.4, 0.6], vec![0.7, -0.3]];
        let b = [1.0, 5.0];
        let program = compile_signed(&a, &b, &s).unwrap();
        assert_eq!(program.negative.as_ref().unwrap().rows, vec![1]);
        let d = signed_matvec(&a, &b, &s).unwrap();
        let plus_only = run(&[vec![0.4, 0.6]], &b, &s);
        assert_eq!(d.values[0], plus_only.values[0]);
    }

    #[test]
    fn signed_rejects_all_zero_row() {
        let s = EncodingSettings::default();
        assert!(compile_signed(&[vec![0.0, 0.0]], &[1.0, 1.0], &s).is_err());
    }

    #[test]
    fn split_identity() {
        let a = vec![vec![0.5, -0.25, 0.0], vec![-1.0, 2.0, -0.0]];
        let (plus, minus) = split_signed(&a);
        for i in 0..2 {
            for j in 0..3 {
                assert!(plus[i][j] >= 0.0 && minus[i][j] >= 0.0);
                assert_eq!(plus[i][j] - minus[i][j], a[i][j]);
            }
        }
    }

    #[test]
    fn two_groups_decode_against_reevaluated_input() {
        let s = EncodingSettings::default();
        let p_mat = vec![vec![0.5, 0.5, 0.0], vec![0.1, 0.2, 0.7]];
        let b = [1.0, 2.0, 0.5];
        let specs = [
            GroupSpec {
                matrix: p_mat.clone(),
                base_frequency: 1.0,
            },
            GroupSpec {
                matrix: p_mat.clone(),
                base_frequency: 2.0,
            },
        ];
        let program = encode_groups(&specs, &b, &s).unwrap();
        program.validate().unwrap();
        let flows = stationary_flows(&program.config).unwrap();
        let products = parallel_group_products(&program, &flows).unwrap();
        assert_eq!(products.len(), 2);
        // oracle: occupancies recomputed at ω = 2 from the compiled temperatures
        let temps: Vec<f64> = program.config.reservoirs()[1..]
            .iter()
            .map(|r| r.temperature)
            .collect();
        let input2: Vec<f64> = temps.iter().map(|&t| 1.0 / (2.0 / t).exp_m1()).collect();
        for (row, (v, bound)) in p_mat.iter().zip(
            products[1]
                .result
                .values
                .iter()
                .zip(&products[1].result.error_bound),
        ) {
            let expect: f64 = row.iter().zip(&input2).map(|(a, x)| a * x).sum();
            assert!((v - expect).abs() <= *bound, "{v} vs {expect}");
        }
        assert_eq!(products[0].result, decode_matvec(&program, &flows).unwrap());
    }

    #[test]
    fn overlapping_groups_rejected() {
        let s = EncodingSettings::default();
        let rows = vec![vec![0.5, 0.5], vec![0.2, 0.8]];
        let specs = [
            GroupSpec {
                matrix: rows.clone(),
                base_frequency: 1.0,
            },
            GroupSpec {
                matrix: rows,
                base_frequency: 1.0 + 1e-6,
            },
        ];
        assert!(encode_groups(&specs, &[1.0, 2.0], &s).is_err());
    }

    #[test]
    fn equal_temperatures_make_group_outputs_constant() {
        let s = EncodingSettings::default();
        let rows = vec![vec![0.3, 0.7], vec![0.9, 0.1]];
        let specs = [
            GroupSpec {
                matrix: rows.clone(),
                base_frequency: 1.0,
            },
            GroupSpec {
                matrix: rows,
                base_frequency: 3.0,
            },
        ];
        let program = encode_groups(&specs, &[0.8, 0.8], &s).unwrap();
        let flows = stationary_flows(&program.config).unwrap();
        for product in parallel_group_products(&program, &flows).unwrap() {
            let c = product.input[0];
            assert!(product.input.iter().all(|x| (x - c).abs() <= 1e-12 * c));
            for (v, bound) in product
                .result
                .values
                .iter()
                .zip(&product.result.error_bound)
            {
                assert!((v - c).abs() <= *bound);
            }
        }
    }
}
