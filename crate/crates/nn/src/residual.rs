use rand_chacha::ChaCha8Rng;

use crate::{
    ActivationLayer, Conv2d, Layer, LayerKind, Mode, NnError, Param, Parameterized, Result, Tensor,
};

/// Residual block `H = F(x) + S(x)`.
///
/// `F` is conv3x3 → ReLU → conv3x3 → ReLU. `S` is the identity, or a 1×1
/// projection convolution when the block changes channels or resolution.
/// With all branch weights and biases zero the identity variant returns its
/// input bit for bit.
pub struct ResidualBlock {
    pub conv1: Conv2d,
    relu1: ActivationLayer,
    pub conv2: Conv2d,
    relu2: ActivationLayer,
    pub projection: Option<Conv2d>,
}

impl ResidualBlock {
    /// Xavier-initialized block. A projection shortcut is created when
    /// `in_channels != out_channels` or `stride != 1`, provided
    /// `allow_projection` is set.
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        allow_projection: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let needs_projection = in_channels != out_channels || stride != 1;
        if needs_projection && !allow_projection {
            return Err(NnError::Config(format!(
                "{name}: branch maps {in_channels} channels (stride {stride}) to {out_channels}; \
                 identity shortcut impossible without projection"
            )));
        }
        let conv1 = Conv2d::new(&format!("{name}.conv1"), in_channels, out_channels, 3, stride, 1, rng)?;
        let conv2 = Conv2d::new(&format!("{name}.conv2"), out_channels, out_channels, 3, 1, 1, rng)?;
        let projection = if needs_projection {
            Some(Conv2d::new(&format!("{name}.proj"), in_channels, out_channels, 1, stride, 0, rng)?)
        } else {
            None
        };
        Ok(Self::from_parts(conv1, conv2, projection))
    }

    pub fn from_parts(conv1: Conv2d, conv2: Conv2d, projection: Option<Conv2d>) -> Self {
        ResidualBlock {
            conv1,
            relu1: ActivationLayer::relu(),
            conv2,
            relu2: ActivationLayer::relu(),
            projection,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels()
    }

    fn join(branch: &Tensor, shortcut: &Tensor) -> Result<Tensor> {
        if branch.shape() != shortcut.shape() {
            return Err(NnError::shape(
                "residual block: branch output vs shortcut",
                shortcut.shape(),
                branch.shape(),
            ));
        }
        branch.add(shortcut)
    }
}

impl Parameterized for ResidualBlock {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.conv1.params();
        p.extend(self.conv2.params());
        if let Some(proj) = &self.projection {
            p.extend(proj.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv1.params_mut();
        p.extend(self.conv2.params_mut());
        if let Some(proj) = &mut self.projection {
            p.extend(proj.params_mut());
        }
        p
    }
}

impl Layer for ResidualBlock {
    fn kind(&self) -> LayerKind {
        LayerKind::ResidualBlock
    }

    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let a = self.relu1.forward(&self.conv1.forward(input, mode)?, mode)?;
        let f = self.relu2.forward(&self.conv2.forward(&a, mode)?, mode)?;
        match &mut self.projection {
            Some(proj) => Self::join(&f, &proj.forward(input, mode)?),
            None => Self::join(&f, input),
        }
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let g = self.relu2.backward(grad_output)?;
        let g = self.conv2.backward(&g)?;
        let g = self.relu1.backward(&g)?;
        let mut dx = self.conv1.backward(&g)?;
        match &mut self.projection {
            Some(proj) => dx.add_assign(&proj.backward(grad_output)?)?,
            None => dx.add_assign(grad_output)?,
        }
        Ok(dx)
    }

    fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let a = self.relu1.infer(&self.conv1.infer(input)?)?;
        let f = self.relu2.infer(&self.conv2.infer(&a)?)?;
        match &self.projection {
            Some(proj) => Self::join(&f, &proj.infer(input)?),
            None => Self::join(&f, input),
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::Scalar;

    fn zero_conv(name: &str, c: usize) -> Conv2d {
        Conv2d::from_tensors(name, Tensor::zeros(&[c, c, 3, 3]), Tensor::zeros(&[c]), 1, 1)
    }

    #[test]
    fn zero_branch_is_exact_identity() {
        let mut block = ResidualBlock::from_parts(zero_conv("a", 2), zero_conv("b", 2), None);
        let x = Tensor::from_fn(&[2, 2, 3, 3], |i| (i as Scalar * 0.37).sin() * 5.0);
        let y = block.forward(&x, Mode::Train).unwrap();
        assert!(y.data().iter().zip(x.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn identity_pointwise_branch_doubles_input() {
        // F realised as 1x1 identity convolutions: relu(relu(x)) + x == 2x for x >= 0
        let eye = |name: &str| {
            let mut w = Tensor::zeros(&[2, 2, 1, 1]);
            w.data_mut()[0] = 1.0;
            w.data_mut()[3] = 1.0;
            Conv2d::from_tensors(name, w, Tensor::zeros(&[2]), 1, 0)
        };
        let block = ResidualBlock::from_parts(eye("a"), eye("b"), None);
        let x = Tensor::from_fn(&[1, 2, 2, 2], |i| i as Scalar + 0.5);
        let y = block.infer(&x).unwrap();
        assert_eq!(y, x.map(|v| 2.0 * v));
    }

    #[test]
    fn channel_change_requires_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(ResidualBlock::new("b", 4, 8, 1, false, &mut rng).is_err());
        let block = ResidualBlock::new("b", 4, 8, 2, true, &mut rng).unwrap();
        let y = block.infer(&Tensor::zeros(&[1, 4, 8, 8])).unwrap();
        assert_eq!(y.shape(), &[1, 8, 4, 4]);
    }
}
