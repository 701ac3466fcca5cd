//! Image IO, the toy-face generator and the labelled dataset loader.

mod dataset;
mod pnm;
mod toygen;

pub use dataset::{ImageSet, LabelRecord, LabeledImage, LABELS_FILE};
pub use pnm::{
    decode_pnm, encode_pnm, read_image, read_pnm, sample_to_unit, unit_to_sample, write_image,
    write_pnm, Pnm,
};
pub use toygen::{toy_faces, toygen, ToyFaceSpec, EXPRESSION_CLASSES, HAIR_CLASSES};
