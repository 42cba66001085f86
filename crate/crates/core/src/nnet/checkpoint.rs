//! Checkpoint file layout:
//!
//! ```text
//! D3RQN-CHECKPOINT
//! format_version = 1
//! scalar = f64
//! <NetworkConfig key = value lines>
//! param_count = N
//! end_header
//! <N little-endian IEEE-754 binary64 values in ParamSet::slices order>
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::config::NetworkConfig;
use super::network::ParamSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &str = "D3RQN-CHECKPOINT";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(params: &ParamSet<T>, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "format_version = {FORMAT_VERSION}")?;
    writeln!(out, "scalar = {}", T::NAME)?;
    out.write_all(params.config().to_text().as_bytes())?;
    writeln!(out, "param_count = {}", params.param_count())?;
    writeln!(out, "end_header")?;
    let mut bytes = Vec::with_capacity(params.param_count() * 8);
    for block in params.slices() {
        for v in block {
            bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(input: R) -> Result<ParamSet<T>> {
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    let mut next_line = |reader: &mut BufReader<R>| -> Result<String> {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Format("checkpoint header ended early".into()));
        }
        Ok(line.trim_end_matches(['\n', '\r']).to_string())
    };
    if next_line(&mut reader)? != MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let mut config_text = String::new();
    let mut param_count = None;
    loop {
        let l = next_line(&mut reader)?;
        if l == "end_header" {
            break;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line `{l}`")))?;
        match k.trim() {
            "format_version" => {
                if v.trim() != FORMAT_VERSION.to_string() {
                    return Err(Error::Format(format!("unsupported checkpoint version {}", v.trim())));
                }
            }
            "scalar" => {}
            "param_count" => {
                param_count = Some(
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Format(format!("bad param_count `{}`", v.trim())))?,
                )
            }
            _ => {
                config_text.push_str(&l);
                config_text.push('\n');
            }
        }
    }
    let config = NetworkConfig::from_text(&config_text)?;
    let mut params = ParamSet::<T>::new(config)?;
    let n = params.param_count();
    if param_count != Some(n) {
        return Err(Error::Format(format!(
            "header declares {param_count:?} parameters, configuration implies {n}"
        )));
    }
    let mut bytes = vec![0u8; n * 8];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| Error::Format("checkpoint payload truncated".into()))?;
    let flat: Vec<T> = bytes
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    let mut rest = Vec::new();
    reader.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    params.set_flat(&flat)?;
    Ok(params)
}

/// Writes through a sibling temp file so a crash never leaves a torn checkpoint.
pub fn save<T: Scalar>(params: &ParamSet<T>, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = fs::File::create(&tmp)?;
        write_checkpoint(params, std::io::BufWriter::new(file))?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load<T: Scalar>(path: &Path) -> Result<ParamSet<T>> {
    read_checkpoint(fs::File::open(path)?)
}
