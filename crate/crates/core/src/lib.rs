//! Participatory pedestrian simulation on street networks, with reward
//! recovery from demonstrated trajectories.

pub mod env;
pub mod io;
pub mod irl;
pub mod lp;
pub mod mdp;
pub mod session;
pub mod sim;
pub mod toy;
pub mod trajectory;
