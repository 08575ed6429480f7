//! Reading aid pipeline: camera rectification, page analysis, finger motion
//! estimation, tactile feedback, Braille encoding, a closed-loop reading
//! simulator and the harness that ties them together.

pub mod draw;
pub mod ebraille;
pub mod feedback;
pub mod font;
pub mod geometry;
pub mod harness;
pub mod imaging;
pub mod motion;
pub mod page;
pub mod raster;
pub mod sim;
