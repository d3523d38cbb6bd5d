pub mod valuegroup;
pub mod series;
pub mod logforms;
pub mod model;
pub mod polygon;
pub mod cohomology;
pub mod workspace;
pub mod preparation;
pub mod uniformizer;
