//! Run reports: the full encode → flows → decode pipeline, as JSON.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use thermoflow_core::compiler::{decode_matvec, decode_signed, DecodedResult};
use thermoflow_core::dynamics::settling_time;
use thermoflow_core::physics::{
    stationary_flows, stationary_flows_pairwise, DeviceConfig, FlowReport,
};

use crate::error::Result;
use crate::problem::{CompiledDocument, CompiledForm, ProblemSettings};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub label: String,
    pub config: DeviceConfig,
    /// J[κ][j].
    pub flows: Vec<Vec<f64>>,
    pub reservoir_flows: Vec<f64>,
    pub entropy_rate: f64,
    pub conservation_residual: f64,
    /// From the vacuum state ⟨n⟩ = 0.
    pub settling_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub values: Vec<f64>,
    pub error_bound: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    /// Directly computed product; absent for raw configs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub abs_error: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub within_bound: Option<bool>,
    /// max |J_direct − J_pairwise| over every device and channel.
    pub pairwise_flow_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub solve_seconds: f64,
    pub decode_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: String,
    pub source_sha256: String,
    pub settings: ProblemSettings,
    pub devices: Vec<DeviceReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decoded: Option<Decoded>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<Oracle>,
    /// Summed over devices.
    pub entropy_rate: f64,
    /// Longest over devices.
    pub settling_time: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<Timing>,
}

pub fn build(doc: &CompiledDocument, oracle: bool, timing: bool) -> Result<RunReport> {
    let settings = doc.problem.settings();
    let start = Instant::now();
    let mut devices = Vec::new();
    let mut flows = Vec::new();
    for (label, config) in doc.devices() {
        let report = stationary_flows(config)?;
        let vacuum = vec![0.0; config.mode_count()];
        devices.push(DeviceReport {
            label: label.into(),
            config: config.clone(),
            flows: report.per_channel.clone(),
            reservoir_flows: report.per_reservoir.clone(),
            entropy_rate: report.entropy_rate,
            conservation_residual: report.conservation_residual(),
            settling_time: settling_time(config, &vacuum, settings.rel_tol)?,
        });
        flows.push(report);
    }
    let solved = Instant::now();

    let decoded = decode(&doc.compiled, &flows)?.map(|d| Decoded {
        values: d.values,
        error_bound: d.error_bound,
    });
    let done = Instant::now();

    let oracle = if oracle {
        Some(build_oracle(doc, &flows, decoded.as_ref())?)
    } else {
        None
    };
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: doc.problem.kind().into(),
        source_sha256: doc.source_sha256.clone(),
        settings: settings.clone(),
        entropy_rate: devices.iter().map(|d| d.entropy_rate).sum(),
        settling_time: devices.iter().map(|d| d.settling_time).fold(0.0, f64::max),
        devices,
        decoded,
        oracle,
        timing: timing.then(|| Timing {
            solve_seconds: (solved - start).as_secs_f64(),
            decode_seconds: (done - solved).as_secs_f64(),
        }),
    })
}

fn decode(compiled: &CompiledForm, flows: &[FlowReport]) -> Result<Option<DecodedResult>> {
    Ok(match compiled {
        CompiledForm::Unsigned { program } => Some(decode_matvec(program, &flows[0])?),
        CompiledForm::Signed { program } => {
            let mut parts = flows.iter();
            let plus = program.positive.as_ref().and_then(|_| parts.next());
            let minus = program.negative.as_ref().and_then(|_| parts.next());
            Some(decode_signed(program, plus, minus)?)
        }
        CompiledForm::Raw { .. } => None,
    })
}

fn build_oracle(
    doc: &CompiledDocument,
    flows: &[FlowReport],
    decoded: Option<&Decoded>,
) -> Result<Oracle> {
    let mut gap = 0.0_f64;
    for ((_, config), direct) in doc.devices().into_iter().zip(flows) {
        let pairwise = stationary_flows_pairwise(config)?;
        for (a, b) in direct
            .per_channel
            .iter()
            .flatten()
            .zip(pairwise.per_channel.iter().flatten())
        {
            gap = gap.max((a - b).abs());
        }
    }
    let mut oracle = Oracle {
        values: None,
        abs_error: None,
        within_bound: None,
        pairwise_flow_gap: gap,
    };
    if let (Some(want), Some(decoded)) = (doc.problem.direct_product(), decoded) {
        let errors: Vec<f64> = decoded
            .values
            .iter()
            .zip(&want)
            .map(|(v, w)| (v - w).abs())
            .collect();
        oracle.within_bound = Some(errors.iter().zip(&decoded.error_bound).all(|(e, b)| e <= b));
        oracle.abs_error = Some(errors);
        oracle.values = Some(want);
    }
    Ok(oracle)
}

/// Pretty JSON with a trailing newline.
pub fn render(report: &RunReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}
