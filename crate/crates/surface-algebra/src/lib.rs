pub mod algebra;
pub mod bracket;
pub mod covering;
pub mod mutation;
pub mod repcheck;
pub mod surface;
