use crate::error::{Error, Result};
use crate::neural::Mlp;
use crate::scalar::{sigmoid, Scalar};
use crate::sysid::{Affine, EngineModel};
use crate::textfmt::{push_line, KvDoc};

/// Actuator range of the pump position in percent.
pub const PUMP_RANGE: f64 = 100.0;

/// Controller inputs in engineering units:
/// `(R_ref(k+1), R(k), R(k-1), Op_ref(k+d), Op(k+d-1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerInputs<S> {
    pub speed_ref: S,
    pub speed: S,
    pub speed_prev: S,
    pub opacity_ref: S,
    pub opacity: S,
}

/// Neural speed controller with a logistic actuator saturation onto `(0, 100)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller<S> {
    mlp: Mlp<S>,
    speed_norm: Affine<S>,
    opacity_norm: Affine<S>,
    delay: usize,
}

impl<S: Scalar> Controller<S> {
    pub const N_INPUTS: usize = 5;

    pub fn new(mlp: Mlp<S>, speed_norm: Affine<S>, opacity_norm: Affine<S>, delay: usize) -> Result<Self> {
        if mlp.n_in() != Self::N_INPUTS {
            return Err(Error::shape(format!(
                "controller network needs {} inputs, got {}",
                Self::N_INPUTS,
                mlp.n_in()
            )));
        }
        Affine::new(speed_norm.mean, speed_norm.scale)?;
        Affine::new(opacity_norm.mean, opacity_norm.scale)?;
        Ok(Self {
            mlp,
            speed_norm,
            opacity_norm,
            delay,
        })
    }

    /// Seeded random controller using the model's speed and opacity scaling.
    pub fn for_model(model: &EngineModel<S>, n_hidden: usize, seed: u64) -> Result<Self> {
        if n_hidden == 0 {
            return Err(Error::InvalidArgument("controller needs at least one hidden node".into()));
        }
        Self::new(
            Mlp::random(Self::N_INPUTS, n_hidden, seed),
            model.speed().output_norm(),
            model.opacity().output_norm(),
            model.delay(),
        )
    }

    pub fn mlp(&self) -> &Mlp<S> {
        &self.mlp
    }

    pub fn weights(&self) -> &[S] {
        self.mlp.weights()
    }

    pub fn set_weights(&mut self, w: &[S]) -> Result<()> {
        self.mlp.set_weights(w)
    }

    pub fn n_params(&self) -> usize {
        self.mlp.n_params()
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn speed_norm(&self) -> Affine<S> {
        self.speed_norm
    }

    pub fn opacity_norm(&self) -> Affine<S> {
        self.opacity_norm
    }

    pub fn normalize(&self, u: &ControllerInputs<S>) -> [S; 5] {
        let (r, o) = (self.speed_norm, self.opacity_norm);
        [
            r.normalize(u.speed_ref),
            r.normalize(u.speed),
            r.normalize(u.speed_prev),
            o.normalize(u.opacity_ref),
            o.normalize(u.opacity),
        ]
    }

    fn check(&self, u: &ControllerInputs<S>) -> Result<[S; 5]> {
        let x = self.normalize(u);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("controller inputs".into()));
        }
        Ok(x)
    }

    /// Pump command `U = 100·σ(raw)`.
    pub fn forward(&self, u: &ControllerInputs<S>) -> Result<S> {
        let raw = self.mlp.forward(&self.check(u)?)?;
        Ok(S::of(PUMP_RANGE) * sigmoid(raw))
    }

    /// `dU/dW` through the saturation; the inputs are treated as fixed.
    pub fn weight_jacobian(&self, u: &ControllerInputs<S>) -> Result<Vec<S>> {
        Ok(self.eval(u)?.1)
    }

    /// Command and `dU/dW` from one pass.
    pub fn eval(&self, u: &ControllerInputs<S>) -> Result<(S, Vec<S>)> {
        let ev = self.mlp.eval(&self.check(u)?)?;
        let s = sigmoid(ev.output);
        let gain = S::of(PUMP_RANGE) * s * (S::one() - s);
        let mut g = ev.weight_jacobian;
        for v in &mut g {
            *v *= gain;
        }
        Ok((S::of(PUMP_RANGE) * s, g))
    }

    pub fn cast<T: Scalar>(&self) -> Controller<T> {
        Controller {
            mlp: self.mlp.cast(),
            speed_norm: self.speed_norm.cast(),
            opacity_norm: self.opacity_norm.cast(),
            delay: self.delay,
        }
    }

    pub fn to_text(&self, comments: &[String]) -> String {
        let mut s = String::from("# dieselnn speed controller\n");
        for c in comments {
            s.push_str(&format!("# {c}\n"));
        }
        push_line(&mut s, "format", &[&"controller", &1]);
        push_line(&mut s, "saturation", &[&"logistic", &0, &PUMP_RANGE]);
        push_line(&mut s, "delay", &[&self.delay]);
        push_line(
            &mut s,
            "inputs",
            &[&"R_ref(k+1)", &"R(k)", &"R(k-1)", &"Op_ref(k+d)", &"Op(k+d-1)"],
        );
        push_line(&mut s, "norm_speed", &[&self.speed_norm.mean, &self.speed_norm.scale]);
        push_line(&mut s, "norm_opacity", &[&self.opacity_norm.mean, &self.opacity_norm.scale]);
        self.mlp.write_text(&mut s);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let doc = KvDoc::parse(text);
        let fmt = doc.get("format")?;
        if fmt.value::<String>(0)? != "controller" {
            return Err(Error::format(fmt.line, "not a controller file"));
        }
        let sat = doc.get("saturation")?;
        if sat.value::<String>(0)? != "logistic" || sat.value::<f64>(2)? != PUMP_RANGE {
            return Err(Error::format(sat.line, "unsupported actuator saturation"));
        }
        let norm = |key: &str| -> Result<Affine<S>> {
            let l = doc.get(key)?;
            l.expect_len(2)?;
            Affine::new(l.value(0)?, l.value(1)?)
        };
        Self::new(
            Mlp::read_text(&doc)?,
            norm("norm_speed")?,
            norm("norm_opacity")?,
            doc.scalar("delay")?,
        )
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>, comments: &[String]) -> Result<()> {
        std::fs::write(path, self.to_text(comments))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> ControllerInputs<f64> {
        ControllerInputs {
            speed_ref: 2000.0,
            speed: 1900.0,
            speed_prev: 1880.0,
            opacity_ref: 15.0,
            opacity: 9.0,
        }
    }

    fn ctrl(mlp: Mlp<f64>) -> Controller<f64> {
        Controller::new(
            mlp,
            Affine::new(2000.0, 600.0).unwrap(),
            Affine::new(8.0, 4.0).unwrap(),
            4,
        )
        .unwrap()
    }

    #[test]
    fn zero_controller_commands_half_range() {
        let c = ctrl(Mlp::zeros(5, 3));
        assert_eq!(c.forward(&inputs()).unwrap(), 50.0);
    }

    #[test]
    fn saturation_limits() {
        let mut m = Mlp::zeros(5, 2);
        let b = m.output_bias_index();
        for (raw, bound) in [(20.0, 100.0), (-20.0, 0.0)] {
            let mut w = m.weights().to_vec();
            w[b] = raw;
            m.set_weights(&w).unwrap();
            let u = ctrl(m.clone()).forward(&inputs()).unwrap();
            assert!(u > 0.0 && u < 100.0);
            assert!((u - bound).abs() < 1e-6, "{u}");
        }
    }

    #[test]
    fn output_bias_entry_is_saturation_slope() {
        let c = ctrl(Mlp::random(5, 4, 3));
        let x = c.normalize(&inputs());
        let s = sigmoid(c.mlp().forward(&x).unwrap());
        let g = c.weight_jacobian(&inputs()).unwrap();
        let want = 100.0 * s * (1.0 - s);
        assert!((g[c.mlp().output_bias_index()] - want).abs() < 1e-12);
    }

    #[test]
    fn wrong_input_count_rejected() {
        let r = Controller::new(
            Mlp::<f64>::zeros(4, 2),
            Affine::identity(),
            Affine::identity(),
            4,
        );
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn text_round_trip() {
        let c = ctrl(Mlp::random(5, 6, 11));
        assert_eq!(Controller::from_text(&c.to_text(&[])).unwrap(), c);
    }
}
