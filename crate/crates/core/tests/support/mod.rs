#![allow(dead_code)]

pub mod gradcheck;
pub mod isolation;
pub mod rotation;
pub mod samplers;
