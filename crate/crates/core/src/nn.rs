//! Fully connected generator and discriminator networks.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::target::BoxDomain;
use crate::tensor::{self, Activation, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Generator,
    Discriminator,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Generator => "generator",
            Role::Discriminator => "discriminator",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "generator" => Ok(Role::Generator),
            "discriminator" => Ok(Role::Discriminator),
            other => Err(Error::Config(format!("unknown network role `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub role: Role,
    /// Permits smooth hidden activations in a generator. Smooth generators
    /// tend to collapse to frozen noise when asked for the uniform
    /// distribution; the flag exists to reproduce exactly that failure.
    pub allow_smooth_hidden: bool,
}

impl MlpSpec {
    pub fn new(role: Role, input_dim: usize, layers: &[(usize, Activation)]) -> Self {
        Self {
            input_dim,
            layers: layers
                .iter()
                .map(|&(width, activation)| LayerSpec { width, activation })
                .collect(),
            role,
            allow_smooth_hidden: false,
        }
    }

    /// `G:[z(dim) | ReLU(hidden) ... | Linear(out)]`.
    pub fn relu_generator(latent_dim: usize, hidden: &[usize], out: usize) -> Self {
        let mut layers: Vec<_> = hidden.iter().map(|&w| (w, Activation::Relu)).collect();
        layers.push((out, Activation::Linear));
        Self::new(Role::Generator, latent_dim, &layers)
    }

    /// `D:[x(dim) | Tanh(hidden) ... | Sigmoid(1)]`.
    pub fn tanh_discriminator(input_dim: usize, hidden: &[usize]) -> Self {
        let mut layers: Vec<_> = hidden.iter().map(|&w| (w, Activation::Tanh)).collect();
        layers.push((1, Activation::Sigmoid));
        Self::new(Role::Discriminator, input_dim, &layers)
    }

    pub fn with_smooth_override(mut self) -> Self {
        self.allow_smooth_hidden = true;
        self
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.width)
    }

    pub fn hidden_all_piecewise_linear(&self) -> bool {
        let n = self.layers.len();
        self.layers[..n.saturating_sub(1)]
            .iter()
            .all(|l| l.activation.is_piecewise_linear())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Constraint("input dimension must be positive".into()));
        }
        let Some(last) = self.layers.last() else {
            return Err(Error::Constraint("network needs at least one layer".into()));
        };
        if self.layers.iter().any(|l| l.width == 0) {
            return Err(Error::Constraint("layer widths must be positive".into()));
        }
        match self.role {
            Role::Generator => {
                if last.activation != Activation::Linear {
                    return Err(Error::Constraint(format!(
                        "generator output layer must be linear, got {}",
                        last.activation
                    )));
                }
                if !self.allow_smooth_hidden && !self.hidden_all_piecewise_linear() {
                    return Err(Error::Constraint(
                        "generator hidden layers must be piecewise-linear (relu): smooth \
                         activations collapse to frozen noise when learning the uniform \
                         distribution; set the smooth-hidden override to allow them"
                            .into(),
                    ));
                }
            }
            Role::Discriminator => {
                if last.width != 1 || last.activation != Activation::Sigmoid {
                    return Err(Error::Constraint(format!(
                        "discriminator head must be sigmoid(1), got {}({})",
                        last.activation, last.width
                    )));
                }
            }
        }
        Ok(())
    }

    /// Layer list as `act:width,act:width,...`.
    pub fn layers_string(&self) -> String {
        self.layers
            .iter()
            .map(|l| format!("{}:{}", l.activation, l.width))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_layers(s: &str) -> Result<Vec<LayerSpec>> {
        s.split(',')
            .map(|item| {
                let (act, width) = item.split_once(':').ok_or_else(|| {
                    Error::Config(format!("layer `{item}` is not of the form activation:width"))
                })?;
                let width = width
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad layer width in `{item}`")))?;
                Ok(LayerSpec {
                    width,
                    activation: act.parse()?,
                })
            })
            .collect()
    }
}

impl fmt::Display for MlpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.role {
            Role::Generator => ("G", "z"),
            Role::Discriminator => ("D", "x"),
        };
        write!(f, "{}:[{}({})", tag.0, tag.1, self.input_dim)?;
        for l in &self.layers {
            write!(f, " | {}({})", l.activation, l.width)?;
        }
        f.write_str("]")
    }
}

/// A validated network and its parameters, stored as
/// `[W_0, b_0, W_1, b_1, ...]` with `W_l` of shape `fan_in × fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    spec: MlpSpec,
    params: Vec<Tensor>,
}

/// Initializes every weight uniformly in `±sqrt(6 / (fan_in + fan_out))`
/// with zero biases.
pub fn build_mlp(spec: MlpSpec, seed: u64) -> Result<Mlp> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(2 * spec.layers.len());
    let mut fan_in = spec.input_dim;
    for layer in &spec.layers {
        let fan_out = layer.width;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        params.push(Tensor::matrix(fan_in, fan_out, w)?);
        params.push(Tensor::zeros(&[fan_out]));
        fan_in = fan_out;
    }
    Ok(Mlp { spec, params })
}

impl Mlp {
    /// Wraps explicit parameters after checking them against the spec.
    pub fn from_parameters(spec: MlpSpec, params: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        let expected = Self::param_shapes(&spec);
        if expected.len() != params.len() {
            return Err(Error::dim("mlp parameters", &[expected.len()], &[params.len()]));
        }
        for (shape, p) in expected.iter().zip(&params) {
            if shape.as_slice() != p.shape() {
                return Err(Error::dim("mlp parameters", shape, p.shape()));
            }
        }
        Ok(Self { spec, params })
    }

    fn param_shapes(spec: &MlpSpec) -> Vec<Vec<usize>> {
        let mut fan_in = spec.input_dim;
        let mut shapes = Vec::new();
        for l in &spec.layers {
            shapes.push(vec![fan_in, l.width]);
            shapes.push(vec![l.width]);
            fan_in = l.width;
        }
        shapes
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn num_layers(&self) -> usize {
        self.spec.layers.len()
    }

    pub fn weight(&self, layer: usize) -> &Tensor {
        &self.params[2 * layer]
    }

    pub fn bias(&self, layer: usize) -> &Tensor {
        &self.params[2 * layer + 1]
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// FNV-1a over the parameter bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for p in &self.params {
            for v in p.data() {
                for byte in v.to_bits().to_le_bytes() {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }

    fn check_input(&self, x: &Tensor, op: &'static str) -> Result<()> {
        if x.shape().len() != 2 || x.cols() != self.spec.input_dim {
            return Err(Error::dim(op, x.shape(), &[self.spec.input_dim]));
        }
        Ok(())
    }

    /// Plain evaluation; `skip_head` stops before the final activation.
    fn eval(&self, x: &Tensor, skip_head: bool) -> Result<Tensor> {
        let mut h = x.clone();
        let n = self.num_layers();
        for (l, layer) in self.spec.layers.iter().enumerate() {
            h = tensor::add_row_bias(&tensor::matmul(&h, self.weight(l))?, self.bias(l))?;
            if !(skip_head && l + 1 == n) {
                h = tensor::activation(&h, layer.activation);
            }
        }
        Ok(h)
    }

    /// Output of the network including its head activation.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x, "forward")?;
        self.eval(x, false)
    }

    /// Output before the head activation (the discriminator's logit).
    pub fn forward_logits(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x, "forward_logits")?;
        self.eval(x, true)
    }

    /// Puts the parameters on `tape` in storage order, as gradient leaves when
    /// `trainable` and as constants otherwise.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    tape.param(p.clone())
                } else {
                    tape.constant(p.clone())
                }
            })
            .collect()
    }

    /// Records the forward pass of `x` using parameter nodes from
    /// [`Mlp::register`]. `skip_head` stops before the final activation.
    pub fn trace_with(&self, tape: &mut Tape, x: Var, vars: &[Var], skip_head: bool) -> Result<Var> {
        let x_shape = tape.value(x).shape().to_vec();
        if x_shape.len() != 2 || x_shape[1] != self.spec.input_dim {
            return Err(Error::dim("trace", &x_shape, &[self.spec.input_dim]));
        }
        if vars.len() != self.params.len() {
            return Err(Error::dim("trace parameters", &[vars.len()], &[self.params.len()]));
        }
        let mut h = x;
        let n = self.num_layers();
        for (l, layer) in self.spec.layers.iter().enumerate() {
            h = tape.matmul(h, vars[2 * l])?;
            h = tape.add_bias(h, vars[2 * l + 1])?;
            if !(skip_head && l + 1 == n) {
                h = tape.activation(h, layer.activation);
            }
        }
        Ok(h)
    }

    /// Serializes as a text header describing the spec followed by the
    /// parameters as little-endian `f64`s.
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let header = format!(
            "{CHECKPOINT_MAGIC}\nrole = {}\ninput_dim = {}\nlayers = {}\nallow_smooth_hidden = {}\nparameters = {}\n{CHECKPOINT_END}\n",
            self.spec.role,
            self.spec.input_dim,
            self.spec.layers_string(),
            self.spec.allow_smooth_hidden,
            self.num_parameters(),
        );
        let mut out = header.into_bytes();
        out.reserve(8 * self.num_parameters());
        for p in &self.params {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Contract(format!("malformed checkpoint: {msg}"));
        let end_marker = format!("\n{CHECKPOINT_END}\n");
        let split = bytes
            .windows(end_marker.len())
            .position(|w| w == end_marker.as_bytes())
            .ok_or_else(|| bad("missing header terminator"))?;
        let header = std::str::from_utf8(&bytes[..split]).map_err(|_| bad("header is not UTF-8"))?;
        let body = &bytes[split + end_marker.len()..];

        let mut lines = header.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("wrong magic line"));
        }
        let mut fields = std::collections::HashMap::new();
        for line in lines {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(line))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| bad(&format!("missing `{k}`")));
        let spec = MlpSpec {
            role: get("role")?.parse()?,
            input_dim: get("input_dim")?.parse().map_err(|_| bad("input_dim"))?,
            layers: MlpSpec::parse_layers(get("layers")?)?,
            allow_smooth_hidden: get("allow_smooth_hidden")?
                .parse()
                .map_err(|_| bad("allow_smooth_hidden"))?,
        };
        let count: usize = get("parameters")?.parse().map_err(|_| bad("parameters"))?;
        if body.len() != 8 * count {
            return Err(bad(&format!("expected {} parameter bytes, found {}", 8 * count, body.len())));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let params = Self::param_shapes(&spec)
            .into_iter()
            .map(|shape| {
                let n = shape.iter().product();
                let data: Vec<f64> = values.by_ref().take(n).collect();
                Tensor::new(shape, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parameters(spec, params)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_checkpoint_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_bytes(&bytes)
    }
}

const CHECKPOINT_MAGIC: &str = "betagan-mlp v1";
const CHECKPOINT_END: &str = "end-header";

/// Uniform noise prior on `[-1, 1]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentPrior {
    pub dim: usize,
}

impl LatentPrior {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("latent dimension must be positive".into()));
        }
        Ok(Self { dim })
    }

    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Tensor {
        let data = (0..m * self.dim)
            .map(|_| 2.0 * rng.random::<f64>() - 1.0)
            .collect();
        Tensor::matrix(m, self.dim, data).expect("m > 0")
    }
}

/// A generator for the box needs at least as many latent dimensions as the
/// box has, and an output width equal to the box dimension.
pub fn validate_pairing(generator: &Mlp, prior: &LatentPrior, domain: &BoxDomain) -> Result<()> {
    if generator.spec.role != Role::Generator {
        return Err(Error::Constraint("pairing expects a generator network".into()));
    }
    if prior.dim < domain.dim() {
        return Err(Error::Constraint(format!(
            "latent dimension {} is smaller than the ambient dimension {}",
            prior.dim,
            domain.dim()
        )));
    }
    if generator.input_dim() != prior.dim {
        return Err(Error::dim(
            "generator input vs latent prior",
            &[generator.input_dim()],
            &[prior.dim],
        ));
    }
    if generator.output_dim() != domain.dim() {
        return Err(Error::dim(
            "generator output vs box",
            &[generator.output_dim()],
            &[domain.dim()],
        ));
    }
    Ok(())
}

/// `G(z)` for a batch of latent rows.
pub fn forward_generator(g: &Mlp, z_batch: &Tensor) -> Result<Tensor> {
    g.forward(z_batch)
}

/// `D(x)` in `(0, 1)` for a batch of ambient rows, as an `m×1` matrix.
pub fn forward_discriminator(d_net: &Mlp, x_batch: &Tensor) -> Result<Tensor> {
    d_net.forward(x_batch)
}
