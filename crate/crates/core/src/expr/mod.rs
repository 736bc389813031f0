//! Symbolic expression trees: representation, protected evaluation,
//! constant gradients, text formats and random construction.

mod analysis;
mod forest;
mod ops;
mod random;
mod sexpr;
mod simplify;
mod tree;

pub use analysis::{match_var_over_const, VarOverConst};
pub use forest::{
    argmax, log_softmax, sample_categorical, select_action, softmax, to_dot, Action, ActionMode,
    Forest, ForestFile,
};
pub use ops::{saturate, Operator, DIV_EPSILON, EXP_ARG_MAX, VALUE_LIMIT};
pub use random::{random_constant, random_leaf, random_subtree, random_tree, TreeGenConfig};
pub use sexpr::{parse, parse_with_features, render, render_infix, render_node};
pub use simplify::{simplify, simplify_node};
pub use tree::{is_saturated, ExprNode, ExprTree};
