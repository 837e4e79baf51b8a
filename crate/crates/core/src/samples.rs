//! Small hand-written instances with known solutions.

use alloc::vec;

use crate::instance::BilevelInstance;
use crate::rational::{int, ratio};

/// One upper and one lower variable, two constraints per level:
/// `G = [-1; 1]`, `H = [4; 2]`, `q = [11; 13]`, `c_x = [1]`, `c_y = [-10]`,
/// `A = [-2; 5]`, `B = [-1; -4]`, `b = [-5; 30]`, `d = [1]`.
pub fn bounded_example() -> BilevelInstance {
    BilevelInstance {
        name: "bounded-example".into(),
        n_u: 1,
        n_l: 1,
        m_u: 2,
        m_l: 2,
        c_x: vec![int(1)],
        c_y: vec![int(-10)],
        g: vec![vec![int(-1)], vec![int(1)]],
        h: vec![vec![int(4)], vec![int(2)]],
        q: vec![int(11), int(13)],
        a: vec![vec![int(-2)], vec![int(5)]],
        b: vec![vec![int(-1)], vec![int(-4)]],
        b_rhs: vec![int(-5), int(30)],
        d: vec![int(1)],
        x_free: vec![],
    }
}

/// `min x` s.t. `v >= 1 - x/10`, where the follower maximizes `y` subject to
/// `y <= 1 + x/10` (written as `min -y`).
pub fn line_example() -> BilevelInstance {
    BilevelInstance {
        name: "line-example".into(),
        n_u: 1,
        n_l: 1,
        m_u: 1,
        m_l: 1,
        c_x: vec![int(1)],
        c_y: vec![int(0)],
        g: vec![vec![ratio(-1, 10)]],
        h: vec![vec![int(-1)]],
        q: vec![int(-1)],
        a: vec![vec![ratio(-1, 10)]],
        b: vec![vec![int(1)]],
        b_rhs: vec![int(1)],
        d: vec![int(-1)],
        x_free: vec![],
    }
}
