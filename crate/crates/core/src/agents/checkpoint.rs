//! Agent checkpoints: a short header followed by network snapshots.
//!
//! ```text
//! ris-agent 1
//! kind sac
//! train_iterations 8000
//! scalars 1
//! <value>
//! hyperparams <line count>
//! <TOML lines>
//! networks <count>
//! <snapshot> ...
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Agent, Hyperparams};
use crate::error::{Error, Result};
use crate::nn::{read_snapshot, write_snapshot};

fn line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut s = String::new();
    r.read_line(&mut s)
        .map_err(|e| Error::Parse(format!("checkpoint I/O: {e}")))?;
    if s.is_empty() {
        return Err(Error::Parse("checkpoint truncated".into()));
    }
    Ok(s.trim_end().to_string())
}

fn value<T: std::str::FromStr>(l: &str, key: &str) -> Result<T> {
    l.strip_prefix(key)
        .and_then(|v| v.strip_prefix(' '))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("expected {key:?}, found {l:?}")))
}

pub fn save_checkpoint(agent: &dyn Agent, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let hp = toml::to_string(agent.hyperparams()).map_err(|e| Error::Parse(e.to_string()))?;
    let hp_lines: Vec<&str> = hp.lines().collect();
    let mut header = format!(
        "ris-agent 1\nkind {}\ntrain_iterations {}\nscalars {}\n",
        agent.kind().name(),
        agent.train_iterations(),
        agent.scalars().len()
    );
    for v in agent.scalars() {
        header.push_str(&format!("{v:e}\n"));
    }
    header.push_str(&format!("hyperparams {}\n", hp_lines.len()));
    for l in &hp_lines {
        header.push_str(l);
        header.push('\n');
    }
    header.push_str(&format!("networks {}\n", agent.networks().len()));
    w.write_all(header.as_bytes()).map_err(|e| Error::io(path, e))?;
    for net in agent.networks() {
        write_snapshot(net, &mut w)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Restores weights, counters and scalars into an agent of the same kind
/// and shape. The stored hyperparameters must match the agent's.
pub fn load_checkpoint(agent: &mut dyn Agent, path: &Path) -> Result<()> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    if line(&mut r)? != "ris-agent 1" {
        return Err(Error::Parse("not an agent checkpoint".into()));
    }
    let kind: String = value(&line(&mut r)?, "kind")?;
    if kind != agent.kind().name() {
        return Err(Error::Parse(format!(
            "checkpoint holds a {kind} agent, not {}",
            agent.kind().name()
        )));
    }
    let iters: u64 = value(&line(&mut r)?, "train_iterations")?;
    let n_scalars: usize = value(&line(&mut r)?, "scalars")?;
    let scalars: Vec<f64> = (0..n_scalars)
        .map(|_| {
            line(&mut r)?
                .parse()
                .map_err(|_| Error::Parse("bad scalar".into()))
        })
        .collect::<Result<_>>()?;
    let n_hp: usize = value(&line(&mut r)?, "hyperparams")?;
    let mut hp_text = String::new();
    for _ in 0..n_hp {
        hp_text.push_str(&line(&mut r)?);
        hp_text.push('\n');
    }
    let hp: Hyperparams = toml::from_str(&hp_text).map_err(|e| Error::Parse(e.to_string()))?;
    if &hp != agent.hyperparams() {
        return Err(Error::Parse("checkpoint hyperparameters differ from the agent's".into()));
    }
    let n_nets: usize = value(&line(&mut r)?, "networks")?;
    let mut nets = Vec::with_capacity(n_nets);
    for _ in 0..n_nets {
        nets.push(read_snapshot(&mut r)?);
    }
    let slots = agent.networks_mut();
    if slots.len() != nets.len() {
        return Err(Error::Parse(format!(
            "checkpoint has {} networks, agent has {}",
            nets.len(),
            slots.len()
        )));
    }
    for (slot, net) in slots.iter().zip(&nets) {
        if slot.sizes() != net.sizes() || slot.layer_norm() != net.layer_norm() {
            return Err(Error::Parse("network shapes differ from the agent's".into()));
        }
    }
    for (slot, net) in slots.into_iter().zip(nets) {
        *slot = net;
    }
    agent.set_scalars(&scalars)?;
    agent.set_train_iterations(iters);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::tests::tiny_hp;
    use crate::agents::{make_agent, AgentKind, Experience};
    use crate::rng::{stream, Stream};

    #[test]
    fn round_trip_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        for kind in AgentKind::ALL {
            let path = dir.path().join(format!("{}.ckpt", kind.name()));
            let mut a = make_agent(kind, 3, 2, tiny_hp(kind), stream(1, Stream::AgentInit)).unwrap();
            let e = Experience {
                state: vec![0.1, 0.2, 0.3],
                action: vec![0.5, -0.5],
                reward: 30.0,
                next_state: vec![0.2, 0.1, 0.0],
            };
            let mut rng = stream(1, Stream::Policy);
            for _ in 0..3 {
                a.train(&[&e, &e, &e, &e], 1e-3, &mut rng).unwrap();
            }
            save_checkpoint(a.as_ref(), &path).unwrap();
            let mut b = make_agent(kind, 3, 2, tiny_hp(kind), stream(9, Stream::AgentInit)).unwrap();
            load_checkpoint(b.as_mut(), &path).unwrap();
            assert_eq!(b.train_iterations(), 3);
            assert_eq!(b.scalars(), a.scalars());
            for (x, y) in a.networks().iter().zip(b.networks()) {
                assert_eq!(*x, y);
            }
            let mut wrong = make_agent(
                AgentKind::Td3,
                3,
                2,
                tiny_hp(AgentKind::Td3),
                stream(1, Stream::AgentInit),
            )
            .unwrap();
            if kind != AgentKind::Td3 {
                assert!(load_checkpoint(wrong.as_mut(), &path).is_err());
            }
        }
    }
}
