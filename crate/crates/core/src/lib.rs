pub mod polymat;
pub mod diffop;
pub mod exactness;
pub mod spectral;
pub mod afree;
pub mod envelope;
