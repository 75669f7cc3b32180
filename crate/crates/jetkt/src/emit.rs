//! Canonical text for resolved problems and operators, plus the JSON
//! envelope shared by every subcommand.
//!
//! All polynomial text uses the core's canonical rendering, which the
//! problem grammar parses back; rendering a resolved problem and re-loading
//! it yields the same objects.

use std::collections::BTreeMap;
use std::sync::Arc;

use jetkt_core::cdiff::CDiffOp;
use jetkt_core::expr::{render_symbol, Coeff, DiffPoly, MultiIndex};
use jetkt_core::JetContext;
use num_traits::One;
use serde_json::{json, Map, Value};

use crate::problem::Problem;

/// The constant value of `f` when it is a constant polynomial.
fn constant_of(f: &DiffPoly) -> Option<Coeff> {
    let mut terms = f.terms();
    match terms.next() {
        None => Some(jetkt_core::expr::coeff_int(0)),
        Some((mono, c)) if mono.is_unit() && terms.next().is_none() => Some(c.clone()),
        Some(_) => None,
    }
}

/// `D_xxt` sugar for a multi-index; independent names are single letters in
/// every bundled problem, and repetition encodes multiplicity.
fn render_d_sigma(ctx: &Arc<JetContext>, sigma: &MultiIndex) -> String {
    let mut letters = String::new();
    for &(i, m) in sigma.pairs() {
        for _ in 0..m {
            letters.push_str(ctx.independent_name(i));
        }
    }
    format!("D_{letters}")
}

/// One σ-term of an operator entry, sign included.
fn render_entry_term(ctx: &Arc<JetContext>, sigma: &MultiIndex, coeff: &DiffPoly) -> String {
    if sigma.is_empty() {
        let text = coeff.render();
        return if coeff.terms().count() > 1 {
            format!("({text})")
        } else {
            text
        };
    }
    let d_part = render_d_sigma(ctx, sigma);
    match constant_of(coeff) {
        Some(c) if c.is_one() => d_part,
        Some(c) if (-c.clone()).is_one() => format!("-{d_part}"),
        _ => {
            if coeff.terms().count() > 1 {
                format!("({})*{d_part}", coeff.render())
            } else {
                format!("{}*{d_part}", coeff.render())
            }
        }
    }
}

/// Canonical text of one operator entry: σ-terms joined with signs, `0` for
/// an empty entry.
pub fn render_entry(ctx: &Arc<JetContext>, entry: &BTreeMap<MultiIndex, DiffPoly>) -> String {
    if entry.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (idx, (sigma, coeff)) in entry.iter().enumerate() {
        let term = render_entry_term(ctx, sigma, coeff);
        if idx == 0 {
            out.push_str(&term);
        } else if let Some(rest) = term.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(&term);
        }
    }
    out
}

/// Entry matrix as rows of canonical entry strings.
pub fn entry_matrix(op: &CDiffOp) -> Vec<Vec<String>> {
    let ctx = op.context();
    (0..op.rows())
        .map(|r| (0..op.cols()).map(|c| render_entry(ctx, op.entry(r, c))).collect())
        .collect()
}

/// Text block for an operator: one `entry[r][c] = …` line per entry.
pub fn operator_text(label: &str, op: &CDiffOp) -> String {
    let mut out = format!(
        "{label}: {}x{} operator, order {}\n",
        op.rows(),
        op.cols(),
        op.order()
    );
    for (r, row) in entry_matrix(op).iter().enumerate() {
        for (c, entry) in row.iter().enumerate() {
            out.push_str(&format!("  entry[{r}][{c}] = {entry}\n"));
        }
    }
    out
}

/// JSON object for an operator.
pub fn operator_json(op: &CDiffOp) -> Value {
    json!({
        "rows": op.rows(),
        "cols": op.cols(),
        "order": op.order(),
        "entries": entry_matrix(op),
    })
}

/// Canonical problem-language text for a resolved problem; parsing it back
/// reproduces the same objects.
pub fn render_problem(problem: &Problem) -> String {
    let ctx = &problem.ctx;
    let mut out = String::new();
    let names = |n: usize, f: &dyn Fn(usize) -> String| -> String {
        (0..n).map(f).collect::<Vec<_>>().join(", ")
    };
    out.push_str(&format!(
        "independent {};\n",
        names(ctx.n_independent(), &|i| ctx.independent_name(i).to_string())
    ));
    out.push_str(&format!(
        "dependent {};\n",
        names(ctx.n_dependent(), &|j| ctx.dependent_name(j).to_string())
    ));
    for (tier, name) in &problem.antifield_names {
        out.push_str(&format!(
            "antifield {name} : {} tier {tier};\n",
            ctx.tier_rank(*tier)
        ));
    }
    if let Some(system) = &problem.system {
        for i in 0..system.n_equations() {
            out.push_str(&format!(
                "equation {} = {};\n",
                render_symbol(ctx, &system.leading(i)),
                system.right_hand_side(i).render()
            ));
        }
    }
    for (name, op) in &problem.compat_ops {
        for row in entry_matrix(op) {
            out.push_str(&format!("compat {name} = [{}];\n", row.join(", ")));
        }
    }
    for (name, density) in &problem.densities {
        out.push_str(&format!("density {name} = {};\n", density.render()));
    }
    for (name, components) in &problem.currents {
        let list = components.iter().map(DiffPoly::render).collect::<Vec<_>>().join(", ");
        out.push_str(&format!("current {name} = {list};\n"));
    }
    for (name, cosymmetry) in &problem.cosymmetries {
        let list = cosymmetry
            .components()
            .iter()
            .map(DiffPoly::render)
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!("cosymmetry {name} = {list};\n"));
    }
    out
}

/// The `problem` block of the JSON envelope.
pub fn problem_json(problem: &Problem) -> Value {
    let ctx = &problem.ctx;
    let mut obj = Map::new();
    obj.insert(
        "independents".into(),
        (0..ctx.n_independent()).map(|i| ctx.independent_name(i)).collect(),
    );
    obj.insert(
        "dependents".into(),
        (0..ctx.n_dependent()).map(|j| ctx.dependent_name(j)).collect(),
    );
    obj.insert(
        "antifields".into(),
        problem
            .antifield_names
            .iter()
            .map(|(tier, name)| json!({"name": name, "rank": ctx.tier_rank(*tier), "tier": tier}))
            .collect(),
    );
    let equations: Vec<Value> = match &problem.system {
        Some(system) => (0..system.n_equations())
            .map(|i| {
                json!(format!(
                    "{} = {}",
                    render_symbol(ctx, &system.leading(i)),
                    system.right_hand_side(i).render()
                ))
            })
            .collect(),
        None => Vec::new(),
    };
    obj.insert("equations".into(), Value::Array(equations));
    obj.insert(
        "compat".into(),
        problem
            .compat_ops
            .iter()
            .map(|(name, op)| json!({"name": name, "entries": entry_matrix(op)}))
            .collect(),
    );
    obj.insert(
        "densities".into(),
        problem
            .densities
            .iter()
            .map(|(name, f)| json!({"name": name, "value": f.render()}))
            .collect(),
    );
    obj.insert(
        "currents".into(),
        problem
            .currents
            .iter()
            .map(|(name, comps)| {
                json!({
                    "name": name,
                    "components": comps.iter().map(DiffPoly::render).collect::<Vec<_>>(),
                })
            })
            .collect(),
    );
    obj.insert(
        "cosymmetries".into(),
        problem
            .cosymmetries
            .iter()
            .map(|(name, co)| {
                json!({
                    "name": name,
                    "components": co.components().iter().map(DiffPoly::render).collect::<Vec<_>>(),
                })
            })
            .collect(),
    );
    Value::Object(obj)
}

/// Assemble the full JSON envelope with its fixed key order.
pub fn envelope(problem: &Problem, command: &str, bounds: Value, results: Value) -> Value {
    let mut obj = Map::new();
    obj.insert("problem".into(), problem_json(problem));
    obj.insert("command".into(), Value::String(command.into()));
    obj.insert("bounds".into(), bounds);
    obj.insert("results".into(), results);
    Value::Object(obj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_problem;
    use crate::problem::lower;

    #[test]
    fn rendered_problem_reparses_to_the_same_objects() {
        let text = "independent x, t;\ndependent u;\nequation u_t = u*u_x + u_xxx;\n\
                    density h = 1/2*u^2;\ncosymmetry psi = u;\n";
        let problem = lower(&parse_problem(text).unwrap()).unwrap();
        let rendered = render_problem(&problem);
        let reparsed = lower(&parse_problem(&rendered).unwrap()).unwrap();
        assert_eq!(render_problem(&reparsed), rendered);
        let sys_a = problem.system().unwrap();
        let sys_b = reparsed.system().unwrap();
        assert_eq!(sys_a.right_hand_side(0), sys_b.right_hand_side(0));
        assert_eq!(problem.densities[0].1, reparsed.densities[0].1);
    }

    #[test]
    fn compat_rows_render_and_reparse() {
        let text = "independent x, y;\ndependent u;\nequation u_x = 0;\nequation u_y = 0;\n\
                    compat Delta1 = [D_y, -D_x];\n";
        let problem = lower(&parse_problem(text).unwrap()).unwrap();
        let rendered = render_problem(&problem);
        assert!(rendered.contains("compat Delta1 = [D_y, -D_x];"));
        let reparsed = lower(&parse_problem(&rendered).unwrap()).unwrap();
        assert_eq!(problem.compat_ops[0].1, reparsed.compat_ops[0].1);
    }

    #[test]
    fn operator_entries_with_polynomial_coefficients_render() {
        let text = "independent x, t;\ndependent u;\nequation u_t = 0;\n\
                    compat L = [u*D_x + 3, (u + 1)*D_xx];\n";
        let problem = lower(&parse_problem(text).unwrap()).unwrap();
        let rendered = render_problem(&problem);
        let reparsed = lower(&parse_problem(&rendered).unwrap()).unwrap();
        assert_eq!(problem.compat_ops[0].1, reparsed.compat_ops[0].1);
    }
}
