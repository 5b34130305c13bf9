use crate::error::{Error, Result};
use crate::neural::Mlp;
use crate::scalar::Scalar;
use crate::textfmt::{push_line, KvDoc};

impl<S: Scalar> Mlp<S> {
    /// Appends the network section (`n_in`, `n_hidden`, `scalar`, one `w` line
    /// per parameter in storage order) to a text document.
    pub fn write_text(&self, out: &mut String) {
        push_line(out, "n_in", &[&self.n_in()]);
        push_line(out, "n_hidden", &[&self.n_hidden()]);
        push_line(out, "scalar", &[&S::NAME]);
        for w in self.weights() {
            push_line(out, "w", &[w]);
        }
    }

    pub fn read_text(doc: &KvDoc) -> Result<Self> {
        let n_in: usize = doc.scalar("n_in")?;
        let n_hidden: usize = doc.scalar("n_hidden")?;
        let weights = doc
            .all("w")
            .map(|l| {
                l.expect_len(1)?;
                l.value::<S>(0)
            })
            .collect::<Result<Vec<S>>>()?;
        Mlp::from_weights(n_in, n_hidden, weights).map_err(|e| match e {
            Error::Shape(m) | Error::NonFinite(m) => Error::format(0, m),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let net = Mlp::<f64>::random(4, 6, 11);
        let mut s = String::new();
        net.write_text(&mut s);
        let back = Mlp::<f64>::read_text(&KvDoc::parse(&s)).unwrap();
        assert_eq!(net, back);

        let net32: Mlp<f32> = net.cast();
        let mut s = String::new();
        net32.write_text(&mut s);
        assert_eq!(Mlp::<f32>::read_text(&KvDoc::parse(&s)).unwrap(), net32);
    }

    #[test]
    fn weight_count_mismatch_is_a_format_error() {
        let doc = KvDoc::parse("n_in 1\nn_hidden 1\nw 0\nw 0\n");
        assert!(matches!(
            Mlp::<f64>::read_text(&doc),
            Err(Error::Format { .. })
        ));
    }
}
