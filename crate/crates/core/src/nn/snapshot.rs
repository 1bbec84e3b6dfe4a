//! Plain-text parameter snapshots.
//!
//! ```text
//! mlp 1
//! sizes 18 128 128 64
//! layer_norm 0
//! output tanh
//! params 27328
//! <one value per line>
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so reading a
//! snapshot back reproduces the parameters bit for bit.

use std::io::{BufRead, Write};

use super::{Activation, Mlp};
use crate::error::{Error, Result};

fn io_err(e: std::io::Error) -> Error {
    Error::Parse(format!("snapshot I/O: {e}"))
}

pub fn write_snapshot<W: Write>(net: &Mlp, mut w: W) -> Result<()> {
    let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
    writeln!(w, "mlp 1").map_err(io_err)?;
    writeln!(w, "sizes {}", sizes.join(" ")).map_err(io_err)?;
    writeln!(w, "layer_norm {}", u8::from(net.layer_norm())).map_err(io_err)?;
    writeln!(w, "output {}", net.output_activation().name()).map_err(io_err)?;
    writeln!(w, "params {}", net.num_params()).map_err(io_err)?;
    for v in &net.params {
        writeln!(w, "{v:e}").map_err(io_err)?;
    }
    Ok(())
}

fn field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing {key:?} line")))?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Parse(format!("expected {key:?}, found {line:?}")))
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}: {s:?}")))
}

/// Reads one network; consumes exactly the lines written by
/// [`write_snapshot`], so several snapshots can follow each other.
pub fn read_snapshot<R: BufRead>(r: &mut R) -> Result<Mlp> {
    let mut header = Vec::with_capacity(5);
    for _ in 0..5 {
        let mut line = String::new();
        if r.read_line(&mut line).map_err(io_err)? == 0 {
            break;
        }
        header.push(line.trim_end().to_string());
    }
    let mut it = header.iter().map(String::as_str);
    if it.next() != Some("mlp 1") {
        return Err(Error::Parse("not an mlp snapshot (version 1)".into()));
    }
    let sizes: Vec<usize> = field(it.next(), "sizes")?
        .split_whitespace()
        .map(|s| number(s, "layer size"))
        .collect::<Result<_>>()?;
    let layer_norm = match field(it.next(), "layer_norm")? {
        "0" => false,
        "1" => true,
        other => return Err(Error::Parse(format!("bad layer_norm flag {other:?}"))),
    };
    let output = Activation::parse(field(it.next(), "output")?)?;
    let n: usize = number(field(it.next(), "params")?, "parameter count")?;
    let mut net = Mlp::zeros(&sizes, layer_norm, output).map_err(|e| Error::Parse(e.to_string()))?;
    if n != net.num_params() {
        return Err(Error::Parse(format!(
            "parameter count {n} does not match layer shapes ({})",
            net.num_params()
        )));
    }
    let mut line = String::new();
    for k in 0..n {
        line.clear();
        if r.read_line(&mut line).map_err(io_err)? == 0 {
            return Err(Error::Parse(format!("snapshot truncated after {k} values")));
        }
        net.params[k] = number(&line, "parameter")?;
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn round_trip_is_exact() {
        let mut rng = stream(1, Stream::AgentInit);
        let a = Mlp::new(&mut rng, &[3, 7, 2], true, Activation::Tanh, 0.1).unwrap();
        let b = Mlp::new(&mut rng, &[2, 1], false, Activation::Linear, 0.1).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&a, &mut buf).unwrap();
        write_snapshot(&b, &mut buf).unwrap();
        let mut r = std::io::Cursor::new(buf);
        assert_eq!(read_snapshot(&mut r).unwrap(), a);
        assert_eq!(read_snapshot(&mut r).unwrap(), b);
    }

    #[test]
    fn rejects_malformed_input() {
        let mut r = std::io::Cursor::new(b"mlp 1\nsizes 2 1\nlayer_norm 0\noutput linear\nparams 4\n1\n".to_vec());
        assert!(matches!(read_snapshot(&mut r), Err(Error::Parse(_))));
        let mut r = std::io::Cursor::new(b"mlp 1\nsizes 2 1\nlayer_norm 0\noutput linear\nparams 3\n1\n2\n".to_vec());
        assert!(read_snapshot(&mut r).is_err());
        let mut r = std::io::Cursor::new(b"hello".to_vec());
        assert!(read_snapshot(&mut r).is_err());
    }
}
