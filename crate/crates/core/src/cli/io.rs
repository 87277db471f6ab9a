//! CSV formats for observations and domain catalogs.

use std::collections::HashMap;
use std::io::Read;

use crate::model::{DomainCatalog, LossObservation};

use super::CliError;

pub const OBSERVATION_HEADER: [&str; 5] = ["target_domain", "source_domain", "budget", "seed", "loss"];
pub const CATALOG_HEADER: [&str; 2] = ["name", "volume_count"];

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedObservations {
    pub observations: Vec<LossObservation>,
    pub warnings: Vec<String>,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, file: &str, expected: &[&str]) -> Result<(), CliError> {
    let headers = rdr.headers().map_err(|e| CliError::csv(file, e))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(CliError::Parse {
            file: file.to_string(),
            line: 1,
            reason: format!("header must be `{}`, found `{}`", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, what: &str, file: &str, line: u64) -> Result<T, CliError> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse().map_err(|_| CliError::Parse {
        file: file.to_string(),
        line,
        reason: format!("{what} {raw:?} is not a valid number"),
    })
}

/// Parses observation rows, resolving domain names against `catalog`.
///
/// Rejects unknown domains, non-positive budgets or losses and repeated
/// `(target, source, budget, seed)` tuples, each reported with its line.
pub fn parse_observations<R: Read>(input: R, catalog: &DomainCatalog, file: &str) -> Result<ParsedObservations, CliError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, file, &OBSERVATION_HEADER)?;
    let mut observations = Vec::new();
    let mut seen: HashMap<(usize, usize, u64, i64), u64> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::csv(file, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |reason: String| CliError::Parse {
            file: file.to_string(),
            line,
            reason,
        };
        if record.len() != OBSERVATION_HEADER.len() {
            return Err(parse_err(format!("expected 5 fields, found {}", record.len())));
        }
        let domain = |idx: usize| {
            let name = &record[idx];
            catalog
                .index_of(name)
                .ok_or_else(|| parse_err(format!("unknown domain {name:?}")))
        };
        let target = domain(0)?;
        let source = domain(1)?;
        let budget: f64 = field(&record, 2, "budget", file, line)?;
        let seed: i64 = field(&record, 3, "seed", file, line)?;
        let loss: f64 = field(&record, 4, "loss", file, line)?;
        let obs = LossObservation::new(target, source, budget, seed, loss).map_err(|e| parse_err(e.to_string()))?;
        if let Some(first) = seen.insert((target, source, budget.to_bits(), seed), line) {
            return Err(parse_err(format!(
                "duplicate observation for ({}, {}, {budget}, {seed}); first seen on line {first}",
                &record[0], &record[1]
            )));
        }
        observations.push(obs);
    }
    let mut warnings = Vec::new();
    if observations.is_empty() {
        warnings.push(format!("{file}: no observation rows after the header"));
    }
    Ok(ParsedObservations { observations, warnings })
}

pub fn write_observations(observations: &[LossObservation], catalog: &DomainCatalog) -> Result<Vec<u8>, CliError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::csv("observations output", e);
    wtr.write_record(OBSERVATION_HEADER).map_err(to_err)?;
    for o in observations {
        wtr.write_record([
            catalog.name(o.target()).to_string(),
            catalog.name(o.source()).to_string(),
            o.budget().to_string(),
            o.seed().to_string(),
            o.loss().to_string(),
        ])
        .map_err(to_err)?;
    }
    wtr.into_inner().map_err(|e| CliError::csv("observations output", e.into_error().into()))
}

/// Catalog rows in canonical order. `volume_count` must be given for every
/// row or left empty for every row.
pub fn parse_catalog<R: Read>(input: R, file: &str) -> Result<DomainCatalog, CliError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, file, &CATALOG_HEADER)?;
    let mut names = Vec::new();
    let mut counts: Vec<Option<i64>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::csv(file, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(CliError::Parse {
                file: file.to_string(),
                line,
                reason: format!("expected 2 fields, found {}", record.len()),
            });
        }
        names.push(record[0].to_string());
        counts.push(if record[1].is_empty() {
            None
        } else {
            Some(field(&record, 1, "volume_count", file, line)?)
        });
    }
    let volume_counts = if counts.iter().all(Option::is_none) {
        None
    } else if counts.iter().all(Option::is_some) {
        Some(counts.into_iter().flatten().collect())
    } else {
        return Err(CliError::Parse {
            file: file.to_string(),
            line: 0,
            reason: "volume_count must be present on every row or on none".into(),
        });
    };
    Ok(DomainCatalog::new(names, volume_counts)?)
}

pub fn write_catalog(catalog: &DomainCatalog) -> Result<Vec<u8>, CliError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::csv("catalog output", e);
    wtr.write_record(CATALOG_HEADER).map_err(to_err)?;
    for (i, name) in catalog.names().iter().enumerate() {
        let count = catalog
            .volume_counts()
            .map(|c| c[i].to_string())
            .unwrap_or_default();
        wtr.write_record([name.as_str(), count.as_str()]).map_err(to_err)?;
    }
    wtr.into_inner().map_err(|e| CliError::csv("catalog output", e.into_error().into()))
}
