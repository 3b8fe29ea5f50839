//! Plain-text trainer checkpoints. Every float is written with Rust's
//! shortest round-trip formatting, so a reload continues bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;

use super::replay::{Experience, ReplayBuffer};
use super::{SoftqError, Trainer, TrainerConfig};
use crate::nn::{Adam, Dense, Mlp};
use crate::rng::SimRng;

const MAGIC: &str = "mfuav-checkpoint 1";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_net(out: &mut String, name: &str, net: &Mlp) {
    writeln!(out, "{name} {}", join(&net.sizes())).unwrap();
    for l in &net.layers {
        writeln!(out, "w {}", join(&l.weights)).unwrap();
        writeln!(out, "b {}", join(&l.bias)).unwrap();
    }
}

pub fn to_string(t: &Trainer) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "seed {}", t.seed).unwrap();
    writeln!(
        out,
        "rng {} {} {}",
        hex::encode(t.rng.get_seed()),
        t.rng.get_stream(),
        t.rng.get_word_pos()
    )
    .unwrap();
    writeln!(out, "counters {} {} {} {}", t.env_steps, t.grad_steps, t.planned_steps, t.episodes_done).unwrap();
    write_net(&mut out, "net", &t.net);
    write_net(&mut out, "target", &t.target);
    let a = &t.adam;
    writeln!(out, "adam {} {} {} {} {}", a.t, a.lr, a.beta1, a.beta2, a.eps).unwrap();
    writeln!(out, "m {}", join(&a.m)).unwrap();
    writeln!(out, "v {}", join(&a.v)).unwrap();
    writeln!(out, "initial_losses {}", join(&t.initial_losses)).unwrap();
    writeln!(out, "recent_losses {}", join(&t.recent_losses)).unwrap();
    writeln!(out, "contexts {}", t.contexts.len()).unwrap();
    for c in &t.contexts {
        writeln!(out, "c {}", join(c)).unwrap();
    }
    let b = &t.buffer;
    writeln!(out, "buffer {} {} {}", b.capacity(), b.head(), b.len()).unwrap();
    for e in b.items() {
        writeln!(out, "e {} {} {}", e.action, e.reward, e.tag).unwrap();
        writeln!(out, "s {}", join(&e.local)).unwrap();
        writeln!(out, "n {}", join(&e.next_local)).unwrap();
    }
    out
}

struct Lines<'a> {
    it: std::str::Lines<'a>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, key: &str) -> Result<Vec<&'a str>, SoftqError> {
        let line = self.it.next().ok_or_else(|| bad(&format!("missing '{key}'")))?;
        let mut parts = line.split(' ').filter(|s| !s.is_empty());
        match parts.next() {
            Some(k) if k == key => Ok(parts.collect()),
            other => Err(bad(&format!("expected '{key}', found {other:?}"))),
        }
    }

    fn floats(&mut self, key: &str) -> Result<Vec<f64>, SoftqError> {
        self.next(key)?.iter().map(|s| parse(s)).collect()
    }
}

fn bad(msg: &str) -> SoftqError {
    SoftqError::Checkpoint(msg.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T, SoftqError> {
    s.parse().map_err(|_| bad(&format!("cannot parse '{s}'")))
}

fn read_net(lines: &mut Lines, name: &str) -> Result<Mlp, SoftqError> {
    let sizes: Vec<usize> = lines.next(name)?.iter().map(|s| parse(s)).collect::<Result<_, _>>()?;
    let mut layers = Vec::new();
    for w in sizes.windows(2) {
        let weights = lines.floats("w")?;
        let bias = lines.floats("b")?;
        if weights.len() != w[0] * w[1] || bias.len() != w[1] {
            return Err(bad("layer shape"));
        }
        layers.push(Dense { inputs: w[0], outputs: w[1], weights, bias });
    }
    Ok(Mlp { layers })
}

/// Rebuild a trainer. `config` supplies the hyper-parameters; the network
/// shape must agree with it.
pub fn from_str(text: &str, config: TrainerConfig) -> Result<Trainer, SoftqError> {
    let mut lines = Lines { it: text.lines() };
    if lines.it.next() != Some(MAGIC) {
        return Err(bad("not a checkpoint"));
    }
    let seed: u64 = parse(lines.next("seed")?.first().ok_or_else(|| bad("seed"))?)?;
    let r = lines.next("rng")?;
    if r.len() != 3 {
        return Err(bad("rng"));
    }
    let key: [u8; 32] = hex::decode(r[0])
        .map_err(|_| bad("rng seed"))?
        .try_into()
        .map_err(|_| bad("rng seed length"))?;
    let mut rng = SimRng::from_seed(key);
    rng.set_stream(parse(r[1])?);
    rng.set_word_pos(parse(r[2])?);
    let c = lines.next("counters")?;
    if c.len() != 4 {
        return Err(bad("counters"));
    }
    let net = read_net(&mut lines, "net")?;
    let target = read_net(&mut lines, "target")?;
    let hidden: Vec<usize> = net.sizes()[1..net.layers.len()].to_vec();
    if hidden != config.hidden {
        return Err(bad("hidden sizes differ from the configuration"));
    }
    let a = lines.next("adam")?;
    if a.len() != 5 {
        return Err(bad("adam"));
    }
    let mut adam = Adam::new(net.num_params(), parse(a[1])?);
    adam.t = parse(a[0])?;
    adam.beta1 = parse(a[2])?;
    adam.beta2 = parse(a[3])?;
    adam.eps = parse(a[4])?;
    adam.m = lines.floats("m")?;
    adam.v = lines.floats("v")?;
    if adam.m.len() != net.num_params() || adam.v.len() != net.num_params() {
        return Err(bad("adam state size"));
    }
    let initial_losses = lines.floats("initial_losses")?;
    let recent_losses = lines.floats("recent_losses")?;
    let n_ctx: usize = parse(lines.next("contexts")?.first().ok_or_else(|| bad("contexts"))?)?;
    let contexts = (0..n_ctx).map(|_| lines.floats("c")).collect::<Result<Vec<_>, _>>()?;
    let b = lines.next("buffer")?;
    if b.len() != 3 {
        return Err(bad("buffer"));
    }
    let (capacity, head, len): (usize, usize, usize) = (parse(b[0])?, parse(b[1])?, parse(b[2])?);
    let mut items = Vec::with_capacity(len);
    for _ in 0..len {
        let e = lines.next("e")?;
        if e.len() != 3 {
            return Err(bad("experience"));
        }
        items.push(Experience {
            action: parse(e[0])?,
            reward: parse(e[1])?,
            tag: parse(e[2])?,
            local: lines.floats("s")?,
            next_local: lines.floats("n")?,
        });
    }
    Ok(Trainer {
        config,
        net,
        target,
        adam,
        buffer: ReplayBuffer::restore(capacity, items, head),
        rng,
        seed,
        contexts,
        env_steps: parse(c[0])?,
        grad_steps: parse(c[1])?,
        planned_steps: parse(c[2])?,
        episodes_done: parse(c[3])?,
        initial_losses,
        recent_losses,
    })
}

pub fn save(trainer: &Trainer, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_string(trainer))
}

pub fn load(path: &Path, config: TrainerConfig) -> Result<Trainer, SoftqError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(&e.to_string()))?;
    from_str(&text, config)
}
