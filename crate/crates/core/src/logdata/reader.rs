use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use super::{parse_record, LineError, LogError, LogRecord, LogSchema, Strictness};

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Streaming reader over a log file. Holds one line in memory at a time.
///
/// In lenient mode bad lines are skipped and their errors collected; in
/// strict mode the first bad line is yielded as an error and iteration ends.
pub struct LogReader<R> {
    input: R,
    schema: LogSchema,
    strictness: Strictness,
    line_no: usize,
    buf: String,
    errors: Vec<LineError>,
    done: bool,
}

impl<R: BufRead> LogReader<R> {
    pub fn new(input: R, schema: LogSchema, strictness: Strictness) -> Self {
        LogReader { input, schema, strictness, line_no: 0, buf: String::new(), errors: Vec::new(), done: false }
    }

    /// Errors skipped so far (lenient mode only).
    pub fn errors(&self) -> &[LineError] {
        &self.errors
    }

    pub fn into_errors(self) -> Vec<LineError> {
        self.errors
    }
}

impl<R: BufRead> Iterator for LogReader<R> {
    type Item = Result<LogRecord, LineError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => self.done = true,
                Ok(_) => {
                    self.line_no += 1;
                    let line = self.buf.trim_end_matches(['\n', '\r']);
                    if line.is_empty() {
                        continue;
                    }
                    match parse_record(line, self.schema) {
                        Ok(r) => return Some(Ok(r)),
                        Err(error) => {
                            let err = LineError { line: self.line_no, error };
                            match self.strictness {
                                Strictness::Lenient => self.errors.push(err),
                                Strictness::Strict => {
                                    self.done = true;
                                    return Some(Err(err));
                                }
                            }
                        }
                    }
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(LineError { line: self.line_no + 1, error: e.into() }));
                }
            }
        }
        None
    }
}

/// Opens a log file, transparently decompressing gzip (detected by magic bytes).
pub fn load_log(
    path: impl AsRef<Path>,
    schema: LogSchema,
    strictness: Strictness,
) -> Result<LogReader<Box<dyn BufRead + Send>>, LogError> {
    let path = path.as_ref();
    let mut file = BufReader::new(File::open(path).map_err(|e| LogError::Io(format!("{}: {e}", path.display())))?);
    let gz = file.fill_buf()?.starts_with(&GZIP_MAGIC);
    let input: Box<dyn BufRead + Send> = if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(file)
    };
    Ok(LogReader::new(input, schema, strictness))
}

/// Everything read from one file.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub records: Vec<LogRecord>,
    pub errors: Vec<LineError>,
}

/// Reads a whole file. Strict mode fails on the first bad line.
pub fn read_log(path: impl AsRef<Path>, schema: LogSchema, strictness: Strictness) -> Result<LoadReport, LineError> {
    let mut reader = load_log(path, schema, strictness).map_err(|error| LineError { line: 0, error })?;
    let mut records = Vec::new();
    for item in reader.by_ref() {
        records.push(item?);
    }
    Ok(LoadReport { records, errors: reader.into_errors() })
}

/// Reads from any byte source (used by tests and in-memory pipelines).
pub fn read_from<R: Read>(input: R, schema: LogSchema, strictness: Strictness) -> LogReader<BufReader<R>> {
    LogReader::new(BufReader::new(input), schema, strictness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn example_lines() -> Vec<String> {
        let base = super::super::codec::tests::EXAMPLE;
        (0..3).map(|i| base.replacen("015300008f3f5a4f5121", &format!("bid{i}"), 1)).collect()
    }

    #[test]
    fn empty_file_yields_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.txt");
        std::fs::write(&p, "").unwrap();
        let report = read_log(&p, LogSchema::EventLog, Strictness::Strict).unwrap();
        assert!(report.records.is_empty() && report.errors.is_empty());
    }

    #[test]
    fn three_lines_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("imp.txt");
        std::fs::write(&p, example_lines().join("\n") + "\n").unwrap();
        let report = read_log(&p, LogSchema::EventLog, Strictness::Strict).unwrap();
        let ids: Vec<_> = report.records.iter().map(|r| r.bid_id.as_str()).collect();
        assert_eq!(ids, ["bid0", "bid1", "bid2"]);
    }

    #[test]
    fn lenient_skips_bad_line_strict_fails() {
        let mut lines = example_lines();
        lines[1] = "garbage".into();
        let text = lines.join("\r\n");
        let mut lenient = read_from(text.as_bytes(), LogSchema::EventLog, Strictness::Lenient);
        let recs: Vec<_> = lenient.by_ref().collect::<Result<_, _>>().unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(lenient.errors().len(), 1);
        assert_eq!(lenient.errors()[0].line, 2);

        let strict: Vec<_> = read_from(text.as_bytes(), LogSchema::EventLog, Strictness::Strict).collect();
        assert_eq!(strict.len(), 2);
        assert!(strict[0].is_ok());
        assert_eq!(strict[1].as_ref().unwrap_err().line, 2);
    }

    #[test]
    fn reads_gzip_by_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("imp.log");
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::fast());
        enc.write_all(example_lines().join("\n").as_bytes()).unwrap();
        std::fs::write(&p, enc.finish().unwrap()).unwrap();
        let report = read_log(&p, LogSchema::EventLog, Strictness::Strict).unwrap();
        assert_eq!(report.records.len(), 3);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_log("/nonexistent/imp.txt", LogSchema::EventLog, Strictness::Strict).unwrap_err();
        assert!(matches!(err.error, LogError::Io(_)));
    }
}
