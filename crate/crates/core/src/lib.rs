#![no_std]
extern crate alloc;

pub mod algebra2group;
pub mod demo;
pub mod dsl;
pub mod forms;
pub mod geometry;
pub mod lie2algebra;
pub mod matrix;
pub mod morphisms;
pub mod sampling;
pub mod torsor2;
pub mod transport;
