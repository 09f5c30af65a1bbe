//! Ballot CSV and outcome JSON Lines.
//!
//! Ballot files have the header `query_id,teacher_id,l0,...,l{k-1}` and one
//! 0/1 row per teacher and query. Rows of one query need not be contiguous.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{BallotMatrix, QueryOutcome};

#[derive(Clone, Debug, PartialEq)]
pub struct QueryBallots {
    pub query_id: u64,
    /// Teacher ids in ascending order, matching the ballot rows.
    pub teacher_ids: Vec<u64>,
    pub ballots: BallotMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallotFile {
    pub label_names: Vec<String>,
    /// In order of each query's first appearance.
    pub queries: Vec<QueryBallots>,
}

impl BallotFile {
    pub fn k(&self) -> usize {
        self.label_names.len()
    }
}

fn malformed(line: u64, message: impl Into<String>) -> Error {
    Error::Malformed { line, message: message.into() }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, csv::Position::line);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => malformed(line, format!("{kind:?}")),
    }
}

pub fn read_ballots_csv<R: Read>(reader: R) -> Result<BallotFile> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() {
        return Ok(BallotFile { label_names: Vec::new(), queries: Vec::new() });
    }
    if header.len() < 3 || &header[0] != "query_id" || &header[1] != "teacher_id" {
        return Err(malformed(1, "header must be query_id,teacher_id,l0,...,l{k-1}"));
    }
    let label_names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    let k = label_names.len();

    let mut order: Vec<u64> = Vec::new();
    let mut rows: HashMap<u64, BTreeMap<u64, Vec<u8>>> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, csv::Position::line);
        let parse_id = |i: usize, what: &str| {
            record[i]
                .parse::<u64>()
                .map_err(|_| malformed(line, format!("{what} {:?} is not a non-negative integer", &record[i])))
        };
        let query_id = parse_id(0, "query_id")?;
        let teacher_id = parse_id(1, "teacher_id")?;
        let bits = (2..2 + k)
            .map(|i| match &record[i] {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(malformed(line, format!("label {} has value {other:?}, expected 0 or 1", i - 2))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let per_query = rows.entry(query_id).or_insert_with(|| {
            order.push(query_id);
            BTreeMap::new()
        });
        if per_query.insert(teacher_id, bits).is_some() {
            return Err(malformed(line, format!("teacher {teacher_id} votes twice in query {query_id}")));
        }
    }

    let queries = order
        .into_iter()
        .map(|query_id| {
            let per_query = rows.remove(&query_id).expect("recorded on first sight");
            let (teacher_ids, bits): (Vec<u64>, Vec<Vec<u8>>) = per_query.into_iter().unzip();
            Ok(QueryBallots { query_id, teacher_ids, ballots: BallotMatrix::new(k, &bits)? })
        })
        .collect::<Result<_>>()?;
    Ok(BallotFile { label_names, queries })
}

pub fn write_ballots_csv<W: Write>(writer: W, queries: &[QueryBallots]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let k = queries.first().map_or(0, |q| q.ballots.k());
    let mut header = vec!["query_id".to_owned(), "teacher_id".to_owned()];
    header.extend((0..k).map(|i| format!("l{i}")));
    wtr.write_record(&header).map_err(csv_error)?;
    for q in queries {
        for (t, row) in q.teacher_ids.iter().zip(q.ballots.rows()) {
            let mut rec = vec![q.query_id.to_string(), t.to_string()];
            rec.extend(row.iter().map(u8::to_string));
            wtr.write_record(&rec).map_err(csv_error)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// One line of the outcome stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub query_id: u64,
    pub answered: bool,
    pub labels: Vec<Option<u8>>,
    pub gap: Vec<f64>,
    pub eps_dp_so_far: f64,
}

impl OutcomeRecord {
    pub fn new(query_id: u64, outcome: &QueryOutcome, eps_dp_so_far: f64) -> Self {
        OutcomeRecord {
            query_id,
            answered: outcome.answered,
            labels: outcome.labels(),
            gap: outcome.diagnostics.gaps.clone(),
            eps_dp_so_far,
        }
    }
}

pub fn write_jsonl<W: Write, T: Serialize>(mut writer: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_interleaved_queries() {
        let csv = "query_id,teacher_id,l0,l1\n7,2,1,0\n3,0,0,0\n7,1,1,1\n3,1,0,1\n";
        let f = read_ballots_csv(csv.as_bytes()).unwrap();
        assert_eq!(f.label_names, vec!["l0", "l1"]);
        assert_eq!(f.queries.len(), 2);
        assert_eq!(f.queries[0].query_id, 7);
        assert_eq!(f.queries[0].teacher_ids, vec![1, 2]);
        assert_eq!(f.queries[0].ballots.row(0), &[1, 1]);
        assert_eq!(f.queries[1].ballots.positive_counts(), vec![0, 1]);
    }

    #[test]
    fn empty_inputs() {
        assert!(read_ballots_csv("".as_bytes()).unwrap().queries.is_empty());
        let f = read_ballots_csv("query_id,teacher_id,l0\n".as_bytes()).unwrap();
        assert!(f.queries.is_empty());
        assert_eq!(f.k(), 1);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            "query_id,teacher_id,l0\n1,1,0\n1,2,2\n",
            "query_id,teacher_id,l0\n1,1,0\n1,x,1\n",
            "query_id,teacher_id,l0\n1,1,0\n1,2\n",
            "query_id,teacher_id,l0\n1,1,0\n1,1,1\n",
        ];
        for csv in cases {
            match read_ballots_csv(csv.as_bytes()) {
                Err(Error::Malformed { line, .. }) => assert_eq!(line, 3, "{csv}"),
                other => panic!("{csv}: {other:?}"),
            }
        }
        assert!(matches!(read_ballots_csv("a,b,c\n".as_bytes()), Err(Error::Malformed { line: 1, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let csv = "query_id,teacher_id,l0,l1\n0,0,1,0\n0,1,1,1\n1,0,0,0\n";
        let f = read_ballots_csv(csv.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_ballots_csv(&mut out, &f.queries).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }

    #[test]
    fn jsonl_shape() {
        let rec = OutcomeRecord {
            query_id: 4,
            answered: true,
            labels: vec![Some(1), None, Some(0)],
            gap: vec![3.0, 1.0, 5.0],
            eps_dp_so_far: 0.5,
        };
        let mut out = Vec::new();
        write_jsonl(&mut out, &[rec]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"query_id\":4,\"answered\":true,\"labels\":[1,null,0],\"gap\":[3.0,1.0,5.0],\"eps_dp_so_far\":0.5}\n"
        );
    }
}
