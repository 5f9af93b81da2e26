//! Texture-based de-noising and segmentation of inscription images.
//!
//! The pipeline runs in stages:
//!
//! 1. [`imaging`] loads an image, converts it to luma and quantizes it to a
//!    small number of gray levels, then tiles it into fixed-size kernels.
//! 2. [`glcm`] builds symmetric co-occurrence matrices for each kernel in four
//!    directions, and [`haralick`] reduces them to fourteen texture features,
//!    the last of which is the maximal correlation coefficient (MCC).
//! 3. [`denoise`] learns per-class MCC ranges from a handful of labeled
//!    kernels and overwrites kernels that fall in the noise classes.
//! 4. [`segment`] slides overlapping windows over the cleaned image and
//!    [`nn`] scores them with a small feed-forward network trained from
//!    labeled windows.
//!
//! ```
//! use epigraph::imaging::{render_synthetic, tile_kernels, SynthConfig};
//! use epigraph::haralick::kernel_features;
//!
//! let (img, _truth) = render_synthetic(&SynthConfig::default(), 7).unwrap();
//! let kernels = tile_kernels(&img, (20, 20), (20, 20)).unwrap();
//! let f = kernel_features(&kernels[0]).unwrap();
//! assert!((0.0..=1.0).contains(&f.mcc()));
//! ```

pub mod denoise;
pub mod glcm;
pub mod haralick;
pub mod imaging;
pub mod nn;
pub mod segment;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/imaging.md")]
    mod imaging {}
    #[doc = include_str!("../../../book/src/glcm.md")]
    mod glcm {}
    #[doc = include_str!("../../../book/src/texture.md")]
    mod texture {}
    #[doc = include_str!("../../../book/src/denoising.md")]
    mod denoising {}
    #[doc = include_str!("../../../book/src/segmentation.md")]
    mod segmentation {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
