use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{LabeledSample, LogitVector, ProbabilityVector};

use super::{create, write_err};

#[derive(Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Logit,
    Prob,
}

impl RowKind {
    fn prefix(self) -> &'static str {
        match self {
            RowKind::Logit => "logit_",
            RowKind::Prob => "prob_",
        }
    }
}

/// Nine significant digits, positional notation where reasonable.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if !(-6..9).contains(&exp) {
        return sci;
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Rounds to the value [`format_sig9`] writes, so written files read back
/// bit-identical.
pub fn round_sig9(v: f64) -> f64 {
    format_sig9(v).parse().expect("formatted float parses")
}

/// Reads `sample_id,label,logit_0..logit_{K-1}` or
/// `sample_id,label,prob_0..prob_{K-1}`; the header decides which. Logit rows
/// go through softmax, probability rows are validated as distributions.
/// Every sample is tagged with `condition` and `severity`.
pub fn read_logits_csv(
    path: impl AsRef<Path>,
    condition: &str,
    severity: u8,
) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    crate::types::check_severity(severity)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            other => parse_err(1, format!("{other:?}")),
        })?;

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.len() < 4 || &header[0] != "sample_id" || &header[1] != "label" {
        return Err(parse_err(
            1,
            "header must be sample_id,label,logit_0,... or sample_id,label,prob_0,... with at \
             least two classes"
                .to_string(),
        ));
    }
    let kind = if header[2].starts_with("logit_") {
        RowKind::Logit
    } else if header[2].starts_with("prob_") {
        RowKind::Prob
    } else {
        return Err(parse_err(1, format!("unexpected column {:?}", &header[2])));
    };
    let k = header.len() - 2;
    for (i, name) in header.iter().skip(2).enumerate() {
        let expected = format!("{}{i}", kind.prefix());
        if name != expected {
            return Err(parse_err(
                1,
                format!("column {} is {name:?}, expected {expected:?} (mixing logit_ and prob_ columns is not allowed)", i + 3),
            ));
        }
    }

    let mut samples = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let label: usize = row[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("label {:?} is not a class index", &row[1])))?;
        if label >= k {
            return Err(parse_err(
                line,
                format!("label {label} out of range for {k} classes"),
            ));
        }
        let values = row
            .iter()
            .skip(2)
            .enumerate()
            .map(|(i, cell)| {
                cell.trim().parse::<f64>().map_err(|_| {
                    parse_err(
                        line,
                        format!("{}{i} = {cell:?} is not a number", kind.prefix()),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let id = row[0].to_string();
        let sample = match kind {
            RowKind::Logit => LogitVector::new(values)
                .and_then(|z| LabeledSample::from_logits(id, label, z, condition, severity)),
            RowKind::Prob => ProbabilityVector::new(values)
                .and_then(|p| LabeledSample::from_probs(id, label, p, condition, severity)),
        }
        .map_err(|e| parse_err(line, e.to_string()))?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Writes logits when every sample carries them, probabilities otherwise.
/// Values use nine significant digits.
pub fn write_logits_csv(samples: &[LabeledSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("no samples to write"))?;
    let k = first.num_classes();
    if samples.iter().any(|s| s.num_classes() != k) {
        return Err(Error::invalid("samples disagree on the number of classes"));
    }
    let kind = if samples.iter().all(|s| s.logits.is_some()) {
        RowKind::Logit
    } else {
        RowKind::Prob
    };
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?);
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend((0..k).map(|i| format!("{}{i}", kind.prefix())));
    out.write_record(&header).map_err(|e| write_err(path, e))?;
    for s in samples {
        let values = match (&s.logits, kind) {
            (Some(z), RowKind::Logit) => z.as_slice(),
            _ => s.probs.as_slice(),
        };
        let mut row = vec![s.sample_id.clone(), s.label.to_string()];
        row.extend(values.iter().map(|&v| format_sig9(v)));
        out.write_record(&row).map_err(|e| write_err(path, e))?;
    }
    out.flush().map_err(|e| write_err(path, e))?;
    Ok(())
}
