//! Model checkpoints: the layer list of all three networks (image, force,
//! fusion) followed by a trailer of the center (`p × f64`), the loss
//! variant (`u8`), η (`f64`) and the threshold (`f64`, NaN when unset).

use std::path::Path;

use super::{EncoderSpec, HypersphereModel, LossVariant};
use crate::bytes::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::tensor::{read_layers, write_layers, ParamStore, Sequential};

pub fn encode_model(model: &HypersphereModel) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_layers(
        &mut out,
        &[&model.image_net.params, &model.force_net.params, &model.fusion.params],
    )?;
    for c in &model.center {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.push(model.variant.tag());
    out.extend_from_slice(&model.eta.to_le_bytes());
    out.extend_from_slice(&model.threshold.unwrap_or(f64::NAN).to_le_bytes());
    Ok(out)
}

pub fn decode_model(bytes: &[u8], spec: EncoderSpec, path: &Path) -> Result<HypersphereModel> {
    spec.validate()?;
    let mut stream = bytes;
    let mut layers = read_layers(&mut stream).map_err(|e| match e {
        Error::Format { detail, .. } => Error::format(path, detail),
        Error::Io { source, .. } => Error::format(path, format!("truncated layer data ({source})")),
        other => other,
    })?;
    let (ni, nf, nh) = (spec.image.len(), spec.force.len(), spec.fusion.len());
    if layers.len() != ni + nf + nh {
        return Err(Error::format(
            path,
            format!(
                "checkpoint holds {} layers, architecture needs {}",
                layers.len(),
                ni + nf + nh
            ),
        ));
    }
    let fusion_layers = layers.split_off(ni + nf);
    let force_layers = layers.split_off(ni);
    let net = |specs: &[crate::tensor::LayerSpec], l| {
        Sequential::new(specs.to_vec(), ParamStore::from_layers(l)).map_err(|e| Error::format(path, e.to_string()))
    };
    let image_net = net(&spec.image, layers)?;
    let force_net = net(&spec.force, force_layers)?;
    let fusion = net(&spec.fusion, fusion_layers)?;

    let mut r = Reader::new(stream, path);
    let center = r.f64s(spec.embedding_dim())?;
    let tag = r.u8()?;
    let variant = LossVariant::from_tag(tag).ok_or_else(|| r.error(format!("loss variant {tag}")))?;
    let eta = r.f64s(1)?[0];
    let threshold = r.f64s(1)?[0];
    r.finish()?;
    if !(eta.is_finite() && eta > 0.0) || center.iter().any(|c| !c.is_finite()) {
        return Err(Error::format(path, "invalid center or eta in trailer"));
    }
    Ok(HypersphereModel {
        spec,
        image_net,
        force_net,
        fusion,
        center,
        variant,
        eta,
        threshold: (!threshold.is_nan()).then_some(threshold),
    })
}

pub fn write_model(path: &Path, model: &HypersphereModel) -> Result<()> {
    write_file(path, &encode_model(model)?)
}

pub fn read_model(path: &Path, spec: EncoderSpec) -> Result<HypersphereModel> {
    decode_model(&read_file(path)?, spec, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_trailer() {
        let mut m = HypersphereModel::init(EncoderSpec::default(), LossVariant::DeepSadExp, 1.0, 5).unwrap();
        m.center = (0..16).map(|i| i as f64 * 0.25 - 1.0).collect();
        m.threshold = Some(0.75);
        let bytes = encode_model(&m).unwrap();
        let back = decode_model(&bytes, EncoderSpec::default(), Path::new("m.bin")).unwrap();
        assert_eq!(back.center, m.center);
        assert_eq!(back.variant, m.variant);
        assert_eq!(back.threshold, Some(0.75));
        assert_eq!(back.flat_params(), m.flat_params());
        assert_eq!(encode_model(&back).unwrap(), bytes);

        m.threshold = None;
        let back = decode_model(&encode_model(&m).unwrap(), EncoderSpec::default(), Path::new("m")).unwrap();
        assert_eq!(back.threshold, None);
    }

    #[test]
    fn truncated_trailer_is_rejected() {
        let m = HypersphereModel::init(EncoderSpec::default(), LossVariant::Svdd, 1.0, 5).unwrap();
        let bytes = encode_model(&m).unwrap();
        assert!(decode_model(&bytes[..bytes.len() - 4], EncoderSpec::default(), Path::new("m")).is_err());
    }
}
