pub mod bounds;
pub mod data;
pub mod sweep;
pub mod train;
pub mod verify;
