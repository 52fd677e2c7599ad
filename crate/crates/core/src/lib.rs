pub mod controller;
pub mod dealer;
pub mod harness;
pub mod http;
pub mod node;
pub mod protocol;
pub mod routing;
pub mod service;
pub mod sss;
pub mod store;
pub mod ticket;
