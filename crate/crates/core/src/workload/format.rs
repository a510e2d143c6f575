use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Trace, WorkloadError};
use crate::sim::PipelineSpec;

pub const TRACE_FORMAT: &str = "schedforge-trace/1";

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Record {
    Header {
        format: String,
        params_fingerprint: String,
        seed: u64,
        pipelines: usize,
    },
    Pipeline(PipelineSpec),
}

/// Header line, then one line per pipeline.
pub fn export_trace<W: Write>(trace: &Trace, writer: W) -> Result<(), WorkloadError> {
    let mut w = BufWriter::new(writer);
    let header = Record::Header {
        format: TRACE_FORMAT.to_string(),
        params_fingerprint: trace.params_fingerprint.clone(),
        seed: trace.seed,
        pipelines: trace.pipelines.len(),
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for p in &trace.pipelines {
        serde_json::to_writer(&mut w, &Record::Pipeline(p.clone())).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn import_trace<R: Read>(reader: R) -> Result<Trace, WorkloadError> {
    let format_err = |line: usize, message: String| WorkloadError::Format { line, message };
    let mut header: Option<(String, u64, usize)> = None;
    let mut pipelines = Vec::new();
    let mut last_line = 0;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        last_line = line_no;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| format_err(line_no, format!("{e}")))?;
        match (record, &header) {
            (
                Record::Header {
                    format,
                    params_fingerprint,
                    seed,
                    pipelines: n,
                },
                None,
            ) => {
                if line_no != 1 {
                    return Err(format_err(line_no, "header must be the first line".into()));
                }
                if format != TRACE_FORMAT {
                    return Err(format_err(
                        line_no,
                        format!("unsupported format `{format}`, expected `{TRACE_FORMAT}`"),
                    ));
                }
                header = Some((params_fingerprint, seed, n));
            }
            (Record::Header { .. }, Some(_)) => return Err(format_err(line_no, "second header record".into())),
            (Record::Pipeline(_), None) => return Err(format_err(line_no, "pipeline record before the header".into())),
            (Record::Pipeline(p), Some(_)) => pipelines.push(p),
        }
    }
    let Some((params_fingerprint, seed, expected)) = header else {
        return Err(format_err(1, "missing header record".into()));
    };
    if pipelines.len() != expected {
        return Err(format_err(
            last_line + 1,
            format!(
                "header announces {expected} pipelines but the file has {} (truncated?)",
                pipelines.len()
            ),
        ));
    }
    let trace = Trace {
        params_fingerprint,
        seed,
        pipelines,
    };
    trace.validate()?;
    Ok(trace)
}

pub fn write_trace_file(trace: &Trace, path: impl AsRef<Path>) -> Result<(), WorkloadError> {
    export_trace(trace, File::create(path)?)
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Trace, WorkloadError> {
    import_trace(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimError;
    use crate::workload::{canonical_suite, generate_trace, preset};

    fn small_trace() -> Trace {
        let mut p = preset("heavy-tailed").unwrap().params.clone();
        p.horizon = 60;
        generate_trace(&p, 5).unwrap()
    }

    fn to_string(t: &Trace) -> String {
        let mut buf = Vec::new();
        export_trace(t, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn round_trip() {
        let t = small_trace();
        let text = to_string(&t);
        assert!(text.starts_with("{\"kind\":\"header\",\"format\":\"schedforge-trace/1\""));
        assert_eq!(text.lines().count(), t.pipelines.len() + 1);
        assert_eq!(import_trace(text.as_bytes()).unwrap(), t);
    }

    #[test]
    fn canonical_trace_zero_round_trips() {
        let t = canonical_suite().remove(0);
        assert_eq!(import_trace(to_string(&t).as_bytes()).unwrap(), t);
    }

    #[test]
    fn truncated_file() {
        let text = to_string(&small_trace());
        let lines: Vec<&str> = text.lines().collect();
        let cut = lines[..lines.len() - 1].join("\n");
        let err = import_trace(cut.as_bytes()).unwrap_err();
        assert!(
            matches!(err, WorkloadError::Format { line, .. } if line == lines.len()),
            "{err}"
        );

        // cut mid-record
        let half = &text[..text.len() - 20];
        let err = import_trace(half.as_bytes()).unwrap_err();
        assert!(
            matches!(err, WorkloadError::Format { line, .. } if line == lines.len()),
            "{err}"
        );
    }

    #[test]
    fn bad_field_reports_its_line() {
        let text = to_string(&small_trace()).replacen("\"cpu_req\":", "\"cpu_request\":", 1);
        let err = import_trace(text.as_bytes()).unwrap_err();
        let WorkloadError::Format { line, message } = err else {
            panic!()
        };
        assert_eq!(line, 2);
        assert!(message.contains("cpu_req"), "{message}");
    }

    #[test]
    fn empty_and_headerless_files() {
        assert!(matches!(
            import_trace(&b""[..]),
            Err(WorkloadError::Format { line: 1, .. })
        ));
        let text = to_string(&small_trace());
        let body: String = text.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            import_trace(body.as_bytes()),
            Err(WorkloadError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn cyclic_deps_fail_validation() {
        let header =
            r#"{"kind":"header","format":"schedforge-trace/1","params_fingerprint":"x","seed":1,"pipelines":1}"#;
        let p = r#"{"kind":"pipeline","pipeline_id":0,"arrival_tick":1,"workload_class":"batch","timeout":10,"ops":[{"op_id":0,"pipeline_id":0,"cpu_req":1,"mem_req":1,"duration":1,"deps":[1]},{"op_id":1,"pipeline_id":0,"cpu_req":1,"mem_req":1,"duration":1,"deps":[0]}]}"#;
        let err = import_trace(format!("{header}\n{p}\n").as_bytes()).unwrap_err();
        assert!(
            matches!(err, WorkloadError::InvalidTrace(SimError::InvalidTrace(_))),
            "{err}"
        );
    }
}
