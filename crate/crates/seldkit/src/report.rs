//! Metric report assembly and serialization (flat key-value text and a CSV
//! row). Undefined metrics print as `undefined` in text and as empty CSV
//! cells; they are never silently zero.

use seld_core::metrics::{DoaMetrics, SeldMetrics};

/// Per-track beamformer diagnostics, measured over the track's active frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackGain {
    pub track: usize,
    /// Coherent signal power change through the beamformer, dB.
    pub signal_gain_db: Option<f64>,
    /// Incoherent noise power reduction through the beamformer, dB.
    pub noise_suppression_db: Option<f64>,
}

impl TrackGain {
    pub fn snr_improvement_db(&self) -> Option<f64> {
        Some(self.signal_gain_db? + self.noise_suppression_db?)
    }
}

/// Everything the evaluation emits for one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub seld: Option<SeldMetrics>,
    pub doa: Option<DoaMetrics>,
    pub f_macro: Option<f64>,
    pub beamform: Vec<TrackGain>,
    /// Human-readable caveats ("no reference events", ...).
    pub notes: Vec<String>,
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "undefined".into(),
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

impl MetricsReport {
    fn fields(&self) -> Vec<(String, Option<f64>)> {
        let seld = self.seld;
        let doa = self.doa;
        let mut fields = vec![
            ("er20".into(), seld.and_then(|m| m.er20)),
            ("f20".into(), seld.and_then(|m| m.f20_pct)),
            ("le_cd".into(), seld.and_then(|m| m.le_cd_deg)),
            ("lr_cd".into(), seld.and_then(|m| m.lr_cd_pct)),
            ("seld_score".into(), seld.and_then(|m| m.seld_score)),
            ("acc".into(), doa.map(|m| m.acc_pct)),
            ("mdr".into(), doa.map(|m| m.mdr_pct)),
            ("mae".into(), doa.and_then(|m| m.mae_deg)),
            ("f_macro".into(), self.f_macro),
        ];
        for g in &self.beamform {
            fields.push((format!("track{}_signal_gain_db", g.track), g.signal_gain_db));
            fields.push((
                format!("track{}_noise_suppression_db", g.track),
                g.noise_suppression_db,
            ));
            fields.push((
                format!("track{}_snr_improvement_db", g.track),
                g.snr_improvement_db(),
            ));
        }
        fields
    }

    /// `key=value` lines, one per metric, then one `note=` line per caveat.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.fields() {
            out.push_str(&format!("{key}={}\n", fmt_value(value)));
        }
        for note in &self.notes {
            out.push_str(&format!("note={note}\n"));
        }
        out
    }

    /// Two CSV lines: header and values. Undefined cells are empty.
    pub fn to_csv_row(&self) -> String {
        let fields = self.fields();
        let header: Vec<&str> = fields.iter().map(|(k, _)| k.as_str()).collect();
        let row: Vec<String> = fields.iter().map(|(_, v)| fmt_cell(*v)).collect();
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}
