//! Weights CSV: `layer,kind,row,col,value` with `kind` one of `weight`,
//! `bias` or `act`. Activation rows store the coefficient index in `row`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DenseLayer, NetError, Network};
use crate::fmt17;

const HEADER: &str = "layer,kind,row,col,value";

pub fn write_weights_csv<W: Write>(net: &Network, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for (l, layer) in net.layers.iter().enumerate() {
        for r in 0..layer.n_out {
            for c in 0..layer.n_in {
                writeln!(w, "{l},weight,{r},{c},{}", fmt17(layer.w(r, c)))?;
            }
        }
        for (r, b) in layer.bias.iter().enumerate() {
            writeln!(w, "{l},bias,{r},0,{}", fmt17(*b))?;
        }
        if let Some(act) = net.activations.get(l) {
            for (i, c) in act.iter().enumerate() {
                writeln!(w, "{l},act,{i},0,{}", fmt17(*c))?;
            }
        }
    }
    Ok(())
}

pub fn save_weights_csv(net: &Network, path: impl AsRef<Path>) -> Result<(), NetError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_weights_csv(net, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Default)]
struct LayerRows {
    weights: BTreeMap<(usize, usize), f64>,
    bias: BTreeMap<usize, f64>,
    act: BTreeMap<usize, f64>,
}

fn dense_from_rows(l: usize, rows: &LayerRows) -> Result<DenseLayer, NetError> {
    let shape_err = |m: String| NetError::ShapeMismatch(format!("layer {l}: {m}"));
    let n_out = rows.weights.keys().map(|k| k.0 + 1).max().unwrap_or(0);
    let n_in = rows.weights.keys().map(|k| k.1 + 1).max().unwrap_or(0);
    if n_out == 0 {
        return Err(shape_err("no weight rows".into()));
    }
    if rows.weights.len() != n_out * n_in {
        return Err(shape_err(format!(
            "{} weight entries for a {n_out}x{n_in} matrix",
            rows.weights.len()
        )));
    }
    if rows.bias.len() != n_out || rows.bias.keys().any(|&r| r >= n_out) {
        return Err(shape_err(format!("expected {n_out} bias entries, found {}", rows.bias.len())));
    }
    let mut layer = DenseLayer::zeros(n_out, n_in);
    for (&(r, c), &v) in &rows.weights {
        *layer.w_mut(r, c) = v;
    }
    for (&r, &v) in &rows.bias {
        layer.bias[r] = v;
    }
    Ok(layer)
}

pub fn read_weights_csv<R: BufRead>(r: R) -> Result<Network, NetError> {
    let mut per_layer: BTreeMap<usize, LayerRows> = BTreeMap::new();
    let mut saw_header = false;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let malformed = |msg: String| NetError::MalformedRow { line: line_no, msg };
        if !saw_header {
            if line.trim() != HEADER {
                return Err(malformed(format!("expected header `{HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(malformed(format!("expected 5 fields, found {}", fields.len())));
        }
        let index = |s: &str, name: &str| {
            s.parse::<usize>()
                .map_err(|e| malformed(format!("bad {name} `{s}`: {e}")))
        };
        let layer = index(fields[0], "layer")?;
        let row = index(fields[2], "row")?;
        let col = index(fields[3], "col")?;
        let value: f64 = fields[4]
            .parse()
            .map_err(|e| malformed(format!("bad value `{}`: {e}", fields[4])))?;
        if !value.is_finite() {
            return Err(malformed("non-finite value".into()));
        }
        let rows = per_layer.entry(layer).or_default();
        let duplicate = match fields[1] {
            "weight" => rows.weights.insert((row, col), value).is_some(),
            "bias" | "act" if col != 0 => return Err(malformed(format!("{} rows must have col 0", fields[1]))),
            "bias" => rows.bias.insert(row, value).is_some(),
            "act" => rows.act.insert(row, value).is_some(),
            other => return Err(malformed(format!("unknown kind `{other}`"))),
        };
        if duplicate {
            return Err(malformed(format!("duplicate {} entry", fields[1])));
        }
    }
    if !saw_header {
        return Err(NetError::MalformedRow {
            line: 1,
            msg: "empty file".into(),
        });
    }
    let count = per_layer.keys().next_back().map(|&l| l + 1).unwrap_or(0);
    if count == 0 || per_layer.len() != count {
        return Err(NetError::ShapeMismatch("layers must be numbered 0..n without gaps".into()));
    }
    let mut layers = Vec::with_capacity(count);
    let mut activations = Vec::with_capacity(count - 1);
    for (&l, rows) in &per_layer {
        layers.push(dense_from_rows(l, rows)?);
        let is_output = l + 1 == count;
        match (is_output, rows.act.is_empty()) {
            (true, false) => {
                return Err(NetError::ShapeMismatch(format!("output layer {l} has activation rows")));
            }
            (false, true) => {
                return Err(NetError::ShapeMismatch(format!("hidden layer {l} has no activation")));
            }
            (false, false) => {
                let n = rows.act.len();
                if rows.act.keys().any(|&i| i >= n) {
                    return Err(NetError::ShapeMismatch(format!(
                        "layer {l} activation coefficients are not contiguous"
                    )));
                }
                activations.push(rows.act.values().copied().collect());
            }
            (true, true) => {}
        }
    }
    Network::from_parts(layers, activations)
}

pub fn load_weights_csv(path: impl AsRef<Path>) -> Result<Network, NetError> {
    read_weights_csv(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{init_network, NetworkConfig};

    fn to_string(net: &Network) -> String {
        let mut buf = Vec::new();
        write_weights_csv(net, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let cfg = NetworkConfig {
            seed: 9,
            ..NetworkConfig::for_interval(3, 5, 3, 30.0)
        };
        let net = init_network(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        save_weights_csv(&net, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = load_weights_csv(&path).unwrap();
        save_weights_csv(&loaded, &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
        assert_eq!(loaded.params(), net.params());
        for i in 0..100 {
            let x = -30.0 + 0.6 * i as f64;
            assert_eq!(
                loaded.forward(x).unwrap().to_bits(),
                net.forward(x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn hand_written_single_neuron() {
        let text = "layer,kind,row,col,value\n\
                    0,weight,0,0,1\n\
                    0,bias,0,0,0\n\
                    0,act,0,0,1.1110537229\n\
                    0,act,1,0,0.5\n\
                    0,act,2,0,0.054235537\n\
                    1,weight,0,0,1\n\
                    1,bias,0,0,0\n";
        let net = read_weights_csv(text.as_bytes()).unwrap();
        assert_eq!(net.hidden_layers(), 1);
        assert_eq!(net.width(), 1);
        assert_eq!(net.activation_degree(), 2);
        assert_eq!(net.forward(0.0).unwrap(), 1.1110537229);
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let bad = "layer,kind,row,col,value\n0,weight,0,0,1\n0,bias,0,0,zero\n";
        assert!(matches!(
            read_weights_csv(bad.as_bytes()),
            Err(NetError::MalformedRow { line: 3, .. })
        ));
        let bad = "layer,kind,row,col,value\n0,weight,0,0\n";
        assert!(matches!(
            read_weights_csv(bad.as_bytes()),
            Err(NetError::MalformedRow { line: 2, .. })
        ));
        let bad = "layer,kind,row,col,value\n0,gain,0,0,1\n";
        assert!(matches!(
            read_weights_csv(bad.as_bytes()),
            Err(NetError::MalformedRow { line: 2, .. })
        ));
        assert!(matches!(
            read_weights_csv("l,k\n".as_bytes()),
            Err(NetError::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn shape_errors() {
        let net = init_network(&NetworkConfig::for_interval(2, 3, 2, 1.0)).unwrap();
        let text = to_string(&net);
        // drop one weight row
        let missing: String = text
            .lines()
            .filter(|l| *l != text.lines().nth(5).unwrap())
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            read_weights_csv(missing.as_bytes()),
            Err(NetError::ShapeMismatch(_))
        ));
        // drop the activation of layer 1
        let no_act: String = text
            .lines()
            .filter(|l| !l.starts_with("1,act"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            read_weights_csv(no_act.as_bytes()),
            Err(NetError::ShapeMismatch(_))
        ));
        let dup = format!("{text}0,bias,0,0,1\n");
        assert!(matches!(
            read_weights_csv(dup.as_bytes()),
            Err(NetError::MalformedRow { .. })
        ));
    }
}
