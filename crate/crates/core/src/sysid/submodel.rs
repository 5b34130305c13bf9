use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::Mlp;
use crate::scalar::Scalar;
use crate::surrogate::Channel;
use crate::sysid::regressor::{Affine, ChannelData, InputLags, RegressorSpec};
use crate::textfmt::{push_line, KvDoc};

/// A MISO output-error network with its lag structure and channel scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct SubModel<S> {
    mlp: Mlp<S>,
    spec: RegressorSpec,
    output: Channel,
    output_norm: Affine<S>,
    input_norms: Vec<Affine<S>>,
}

impl<S: Scalar> SubModel<S> {
    pub fn new(
        mlp: Mlp<S>,
        spec: RegressorSpec,
        output: Channel,
        output_norm: Affine<S>,
        input_norms: Vec<Affine<S>>,
    ) -> Result<Self> {
        spec.validate(output)?;
        if mlp.n_in() != spec.n_regressors() {
            return Err(Error::shape(format!(
                "network has {} inputs but the regressor set has {}",
                mlp.n_in(),
                spec.n_regressors()
            )));
        }
        if input_norms.len() != spec.inputs.len() {
            return Err(Error::shape("one normalisation per input channel required"));
        }
        for a in input_norms.iter().chain(std::iter::once(&output_norm)) {
            Affine::new(a.mean, a.scale)?;
        }
        Ok(Self {
            mlp,
            spec,
            output,
            output_norm,
            input_norms,
        })
    }

    pub fn mlp(&self) -> &Mlp<S> {
        &self.mlp
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn output(&self) -> Channel {
        self.output
    }

    pub fn output_norm(&self) -> Affine<S> {
        self.output_norm
    }

    pub fn input_norms(&self) -> &[Affine<S>] {
        &self.input_norms
    }

    pub fn input_norm(&self, ch: Channel) -> Option<Affine<S>> {
        self.spec
            .inputs
            .iter()
            .position(|i| i.channel == ch)
            .map(|n| self.input_norms[n])
    }

    pub fn max_lag(&self) -> usize {
        self.spec.max_lag()
    }

    pub fn set_weights(&mut self, w: &[S]) -> Result<()> {
        self.mlp.set_weights(w)
    }

    /// Normalised regressor for sample `k`, reading outputs `< k` from
    /// `outputs` and lagged inputs from `inputs` (aligned with the spec).
    pub(crate) fn regressor(&self, k: usize, outputs: &[S], inputs: &[&[S]]) -> Vec<S> {
        let mut x = Vec::with_capacity(self.spec.n_regressors());
        for i in 1..=self.spec.output_lags {
            x.push(self.output_norm.normalize(outputs[k - i]));
        }
        for ((lags, norm), u) in self.spec.inputs.iter().zip(&self.input_norms).zip(inputs) {
            for l in 0..lags.lags {
                x.push(norm.normalize(u[k - lags.delay - l]));
            }
        }
        x
    }

    /// Engineering-unit output for the given regressor.
    pub(crate) fn predict(&self, x: &[S]) -> Result<S> {
        Ok(self.output_norm.denormalize(self.mlp.forward(x)?))
    }

    /// `∂ŷ_norm/∂u` for `u = channel(k - lag)`, in normalised output per
    /// engineering input unit; zero when that input is not a regressor.
    pub fn input_partial(&self, x: &[S], channel: Channel, lag: usize) -> Result<S> {
        match self.spec.input_position(channel, lag) {
            None => Ok(S::zero()),
            Some(pos) => {
                let g = self.mlp.input_jacobian(x)?;
                let norm = self.input_norm(channel).expect("position implies input");
                Ok(g[pos] / norm.scale)
            }
        }
    }

    fn collect_inputs<'a>(&self, data: &'a ChannelData<S>) -> Result<Vec<&'a [S]>> {
        self.spec.inputs.iter().map(|i| data.get(i.channel)).collect()
    }

    fn check_lengths(&self, inputs: &[&[S]], init: &[S]) -> Result<usize> {
        let n = inputs.first().map_or(0, |u| u.len());
        if inputs.iter().any(|u| u.len() != n) {
            return Err(Error::shape("input channels have different lengths"));
        }
        let k0 = self.max_lag();
        if init.len() < k0 {
            return Err(Error::IllPosed(format!(
                "initial history has {} samples, the {} model needs {k0}",
                self.output,
                init.len()
            )));
        }
        if n < k0 {
            return Err(Error::shape(format!("need at least {k0} input samples, got {n}")));
        }
        Ok(n)
    }

    /// Free-run simulation. Samples before `max_lag()` are copied from `init`;
    /// afterwards every output regressor is a previously simulated value.
    pub fn simulate(&self, data: &ChannelData<S>, init: &[S]) -> Result<Vec<S>> {
        let inputs = self.collect_inputs(data)?;
        let n = self.check_lengths(&inputs, init)?;
        let k0 = self.max_lag();
        let mut y = Vec::with_capacity(n);
        y.extend_from_slice(&init[..k0]);
        for k in k0..n {
            let x = self.regressor(k, &y, &inputs);
            let v = self.predict(&x)?;
            if !v.is_finite() {
                return Err(Error::Simulation {
                    index: k,
                    reason: format!("{} output not finite", self.output),
                });
            }
            y.push(v);
        }
        Ok(y)
    }

    /// Simulation in normalised output units together with `dz(k)/dθ`
    /// (rows before `max_lag()` are zero).
    pub(crate) fn simulate_with_sensitivities(
        &self,
        data: &ChannelData<S>,
        init: &[S],
    ) -> Result<(Vec<S>, Matrix<S>)> {
        let inputs = self.collect_inputs(data)?;
        let n = self.check_lengths(&inputs, init)?;
        let k0 = self.max_lag();
        let p = self.mlp.n_params();
        let ny = self.spec.output_lags;
        let mut y: Vec<S> = init[..k0].to_vec();
        let mut z: Vec<S> = y.iter().map(|v| self.output_norm.normalize(*v)).collect();
        let mut sens = Matrix::zeros(n, p);
        for k in k0..n {
            let x = self.regressor(k, &y, &inputs);
            let ev = self.mlp.eval(&x)?;
            if !ev.output.is_finite() {
                return Err(Error::Simulation {
                    index: k,
                    reason: format!("{} output not finite", self.output),
                });
            }
            let mut row = ev.weight_jacobian;
            for i in 1..=ny {
                if k - i < k0 {
                    continue;
                }
                let gi = ev.input_jacobian[i - 1];
                if gi == S::zero() {
                    continue;
                }
                for (r, &s) in row.iter_mut().zip(sens.row(k - i)) {
                    *r += gi * s;
                }
            }
            sens.row_mut(k).copy_from_slice(&row);
            z.push(ev.output);
            y.push(self.output_norm.denormalize(ev.output));
        }
        Ok((z, sens))
    }

    /// `dŷ(k)/dθ` in engineering output units along the free-run trajectory.
    pub fn sensitivities(&self, data: &ChannelData<S>, init: &[S]) -> Result<Matrix<S>> {
        let (_, mut sens) = self.simulate_with_sensitivities(data, init)?;
        let s = self.output_norm.scale;
        for i in 0..sens.rows() {
            for v in sens.row_mut(i) {
                *v *= s;
            }
        }
        Ok(sens)
    }

    pub fn cast<T: Scalar>(&self) -> SubModel<T> {
        SubModel {
            mlp: self.mlp.cast(),
            spec: self.spec.clone(),
            output: self.output,
            output_norm: self.output_norm.cast(),
            input_norms: self.input_norms.iter().map(Affine::cast).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# dieselnn output-error sub-model\n");
        push_line(&mut s, "format", &[&"submodel", &1]);
        push_line(&mut s, "output", &[&self.output]);
        push_line(&mut s, "output_lags", &[&self.spec.output_lags]);
        for i in &self.spec.inputs {
            push_line(&mut s, "input", &[&i.channel, &i.delay, &i.lags]);
        }
        push_line(&mut s, "norm_out", &[&self.output_norm.mean, &self.output_norm.scale]);
        for (i, a) in self.spec.inputs.iter().zip(&self.input_norms) {
            push_line(&mut s, "norm_in", &[&i.channel, &a.mean, &a.scale]);
        }
        self.mlp.write_text(&mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = KvDoc::parse(text);
        let fmt = doc.get("format")?;
        if fmt.value::<String>(0)? != "submodel" {
            return Err(Error::format(fmt.line, "not a sub-model file"));
        }
        let output = parse_channel(&doc, "output")?;
        let output_lags = doc.scalar("output_lags")?;
        let mut inputs = Vec::new();
        for l in doc.all("input") {
            l.expect_len(3)?;
            let ch: String = l.value(0)?;
            inputs.push(InputLags::new(
                ch.parse().map_err(|_| Error::format(l.line, format!("unknown channel `{ch}`")))?,
                l.value(1)?,
                l.value(2)?,
            ));
        }
        let spec = RegressorSpec::new(output_lags, inputs);
        let no = doc.get("norm_out")?;
        no.expect_len(2)?;
        let output_norm = Affine::new(no.value(0)?, no.value(1)?)?;
        let mut input_norms = Vec::new();
        for (i, l) in spec.inputs.iter().zip(doc.all("norm_in")) {
            l.expect_len(3)?;
            if l.value::<String>(0)? != i.channel.name() {
                return Err(Error::format(l.line, "normalisation order does not match inputs"));
            }
            input_norms.push(Affine::new(l.value(1)?, l.value(2)?)?);
        }
        let mlp = Mlp::read_text(&doc)?;
        Self::new(mlp, spec, output, output_norm, input_norms)
    }
}

fn parse_channel(doc: &KvDoc, key: &str) -> Result<Channel> {
    let l = doc.get(key)?;
    let raw: String = l.value(0)?;
    raw.parse()
        .map_err(|_| Error::format(l.line, format!("unknown channel `{raw}`")))
}

/// Free-run simulation of one sub-model.
pub fn simulate_submodel<S: Scalar>(m: &SubModel<S>, data: &ChannelData<S>, init: &[S]) -> Result<Vec<S>> {
    m.simulate(data, init)
}

/// Forward sensitivity recursion `dŷ(k)/dθ` of one sub-model.
pub fn oe_sensitivities<S: Scalar>(m: &SubModel<S>, data: &ChannelData<S>, init: &[S]) -> Result<Matrix<S>> {
    m.sensitivities(data, init)
}
