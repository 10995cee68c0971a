//! External denoisers run as child processes speaking the `DIPT` format on
//! stdin/stdout.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::denoise::{Denoiser, Domain};
use super::tensor::{decode_tensor, encode_tensor, DType, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PluginSpec {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
    pub expected_len: usize,
    /// Dims sent with the input tensor; a flat vector when `None`.
    pub dims: Option<Vec<usize>>,
}

impl PluginSpec {
    pub fn new(
        program: impl Into<PathBuf>,
        timeout_secs: f64,
        expected_len: usize,
    ) -> Result<Self> {
        if !(timeout_secs > 0.0) || !timeout_secs.is_finite() {
            return Err(Error::config(format!(
                "plugin timeout must be positive, got {timeout_secs}"
            )));
        }
        Ok(Self {
            program: program.into(),
            args: Vec::new(),
            timeout: Duration::from_secs_f64(timeout_secs),
            expected_len,
            dims: None,
        })
    }

    pub fn with_args(mut self, args: Vec<String>) -> Self {
        self.args = args;
        self
    }

    pub fn with_dims(mut self, dims: Vec<usize>) -> Self {
        self.dims = Some(dims);
        self
    }
}

const POLL: Duration = Duration::from_millis(5);

pub fn plugin_denoise(v: &[f64], spec: &PluginSpec) -> Result<Vec<f64>> {
    if v.len() != spec.expected_len {
        return Err(Error::shape(format!(
            "plugin input has {} values, expected {}",
            v.len(),
            spec.expected_len
        )));
    }
    let dims = spec.dims.clone().unwrap_or_else(|| vec![v.len()]);
    let input = encode_tensor(&Tensor::new(dims, v.to_vec())?, DType::F64);

    let mut child = Command::new(&spec.program)
        .args(&spec.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Plugin(format!("cannot launch {}: {e}", spec.program.display())))?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let mut stdout = child.stdout.take().expect("piped stdout");
    let mut stderr = child.stderr.take().expect("piped stderr");
    // A plugin may exit without reading its input; a broken pipe is not ours
    // to report.
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        stdout.read_to_end(&mut buf).map(|_| buf)
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr.read_to_end(&mut buf);
        buf
    });

    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if start.elapsed() >= spec.timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Timeout(spec.timeout.as_secs_f64()));
        }
        thread::sleep(POLL);
    };
    let _ = writer.join();
    let out = out_reader.join().expect("stdout reader panicked")?;
    let err = err_reader.join().expect("stderr reader panicked");

    if !status.success() {
        return Err(Error::Plugin(format!(
            "{} exited with {status}: {}",
            spec.program.display(),
            String::from_utf8_lossy(&err).trim()
        )));
    }
    let t = decode_tensor(&out)?;
    if t.len() != spec.expected_len {
        return Err(Error::Protocol(format!(
            "plugin returned {} values, expected {}",
            t.len(),
            spec.expected_len
        )));
    }
    Ok(t.data)
}

#[derive(Debug, Clone)]
pub struct PluginDenoiser {
    pub spec: PluginSpec,
    pub domain: Domain,
}

impl Denoiser for PluginDenoiser {
    fn name(&self) -> &str {
        "plugin"
    }
    fn domain(&self) -> Domain {
        self.domain
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![("timeout".into(), self.spec.timeout.as_secs_f64())]
    }
    fn denoise(&self, v: &[f64]) -> Result<Vec<f64>> {
        plugin_denoise(v, &self.spec)
    }
}
