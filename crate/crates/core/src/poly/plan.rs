use super::{MultCount, PolyError};

/// A node of an evaluation plan. Operands refer to other nodes by index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanNode {
    Input,
    Const(f64),
    Add(usize, usize),
    Mul(usize, usize),
    Square(usize),
    ScalarMul(usize, f64),
}

/// An evaluation DAG over one input leaf and constant leaves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Plan {
    pub nodes: Vec<PlanNode>,
    pub root: usize,
}

impl Plan {
    pub fn new() -> Self {
        Plan::default()
    }

    /// Appends a node and makes it the root.
    pub fn push(&mut self, node: PlanNode) -> usize {
        self.nodes.push(node);
        self.root = self.nodes.len() - 1;
        self.root
    }

    /// `x^(2^squarings)` by repeated squaring.
    pub fn repeated_squaring(squarings: usize) -> Plan {
        let mut plan = Plan::new();
        let mut cur = plan.push(PlanNode::Input);
        for _ in 0..squarings {
            cur = plan.push(PlanNode::Square(cur));
        }
        plan
    }

    /// Horner evaluation of `coeffs` (constant first).
    pub fn horner(coeffs: &[f64]) -> Plan {
        let mut plan = Plan::new();
        let x = plan.push(PlanNode::Input);
        let Some((&lead, rest)) = coeffs.split_last() else {
            plan.push(PlanNode::Const(0.0));
            return plan;
        };
        let mut acc = plan.push(PlanNode::Const(lead));
        for &c in rest.iter().rev() {
            let prod = plan.push(PlanNode::Mul(acc, x));
            let k = plan.push(PlanNode::Const(c));
            acc = plan.push(PlanNode::Add(prod, k));
        }
        plan
    }

    /// Evaluates the plan in plain arithmetic.
    pub fn evaluate(&self, x: f64) -> Result<f64, PolyError> {
        let order = self.topological_order()?;
        let mut vals = vec![0.0; self.nodes.len()];
        for i in order {
            vals[i] = match self.nodes[i] {
                PlanNode::Input => x,
                PlanNode::Const(c) => c,
                PlanNode::Add(a, b) => vals[a] + vals[b],
                PlanNode::Mul(a, b) => vals[a] * vals[b],
                PlanNode::Square(a) => vals[a] * vals[a],
                PlanNode::ScalarMul(a, c) => vals[a] * c,
            };
        }
        Ok(vals[self.root])
    }

    fn operands(node: &PlanNode) -> impl Iterator<Item = usize> {
        let (a, b) = match *node {
            PlanNode::Input | PlanNode::Const(_) => (None, None),
            PlanNode::Add(a, b) | PlanNode::Mul(a, b) => (Some(a), Some(b)),
            PlanNode::Square(a) | PlanNode::ScalarMul(a, _) => (Some(a), None),
        };
        a.into_iter().chain(b)
    }

    /// Post-order of the nodes reachable from the root.
    fn topological_order(&self) -> Result<Vec<usize>, PolyError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Open,
            Done,
        }
        if self.root >= self.nodes.len() {
            return Err(PolyError::DanglingReference {
                node: self.root,
                target: self.root,
            });
        }
        let mut marks = vec![Mark::New; self.nodes.len()];
        let mut order = Vec::new();
        // explicit stack: (node, operands already pushed)
        let mut stack = vec![(self.root, false)];
        while let Some((n, expanded)) = stack.pop() {
            if expanded {
                marks[n] = Mark::Done;
                order.push(n);
                continue;
            }
            match marks[n] {
                Mark::Done => continue,
                Mark::Open => return Err(PolyError::CyclicPlan(n)),
                Mark::New => {}
            }
            marks[n] = Mark::Open;
            stack.push((n, true));
            for op in Self::operands(&self.nodes[n]) {
                if op >= self.nodes.len() {
                    return Err(PolyError::DanglingReference { node: n, target: op });
                }
                match marks[op] {
                    Mark::Open => return Err(PolyError::CyclicPlan(op)),
                    Mark::New => stack.push((op, false)),
                    Mark::Done => {}
                }
            }
        }
        Ok(order)
    }
}

/// Counts multiplications and the multiplicative depth of a plan.
///
/// Nodes that depend on the input are treated as ciphertexts. A product of
/// two ciphertexts is a ct-mult; a product of a ciphertext and a
/// constant-valued node (or a [`PlanNode::ScalarMul`]) is a scalar mult;
/// products of constants are folded for free. Both kinds add one to depth.
pub fn mult_depth_of_plan(plan: &Plan) -> Result<MultCount, PolyError> {
    let order = plan.topological_order()?;
    let n = plan.nodes.len();
    let mut cipher = vec![false; n];
    let mut depth = vec![0u64; n];
    let mut count = MultCount::default();
    for i in order {
        let (c, d) = match plan.nodes[i] {
            PlanNode::Input => (true, 0),
            PlanNode::Const(_) => (false, 0),
            PlanNode::Add(a, b) => (cipher[a] || cipher[b], depth[a].max(depth[b])),
            PlanNode::Square(a) => {
                if cipher[a] {
                    count.ct_mults += 1;
                    (true, depth[a] + 1)
                } else {
                    (false, 0)
                }
            }
            PlanNode::Mul(a, b) => match (cipher[a], cipher[b]) {
                (true, true) => {
                    count.ct_mults += 1;
                    (true, depth[a].max(depth[b]) + 1)
                }
                (true, false) | (false, true) => {
                    count.scalar_mults += 1;
                    (true, depth[a].max(depth[b]) + 1)
                }
                (false, false) => (false, 0),
            },
            PlanNode::ScalarMul(a, _) => {
                if cipher[a] {
                    count.scalar_mults += 1;
                    (true, depth[a] + 1)
                } else {
                    (false, 0)
                }
            }
        };
        cipher[i] = c;
        depth[i] = d;
    }
    count.depth = depth[plan.root];
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent count: longest path of multiplication nodes by recursion.
    fn recursive_depth(plan: &Plan, n: usize) -> u64 {
        match plan.nodes[n] {
            PlanNode::Input | PlanNode::Const(_) => 0,
            PlanNode::Add(a, b) => recursive_depth(plan, a).max(recursive_depth(plan, b)),
            PlanNode::Mul(a, b) => 1 + recursive_depth(plan, a).max(recursive_depth(plan, b)),
            PlanNode::Square(a) | PlanNode::ScalarMul(a, _) => 1 + recursive_depth(plan, a),
        }
    }

    fn nested_squares() -> Plan {
        // ((x^2 + 1)^2 + 3)^2
        let mut p = Plan::new();
        let x = p.push(PlanNode::Input);
        let s1 = p.push(PlanNode::Square(x));
        let one = p.push(PlanNode::Const(1.0));
        let a1 = p.push(PlanNode::Add(s1, one));
        let s2 = p.push(PlanNode::Square(a1));
        let three = p.push(PlanNode::Const(3.0));
        let a2 = p.push(PlanNode::Add(s2, three));
        p.push(PlanNode::Square(a2));
        p
    }

    #[test]
    fn three_multiplications_for_nested_squares() {
        let plan = nested_squares();
        let c = mult_depth_of_plan(&plan).unwrap();
        assert_eq!((c.ct_mults, c.depth), (3, 3));
        let x: f64 = 0.7;
        let want = ((x * x + 1.0).powi(2) + 3.0).powi(2);
        assert!((plan.evaluate(x).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn bare_input_costs_nothing() {
        let mut p = Plan::new();
        p.push(PlanNode::Input);
        let c = mult_depth_of_plan(&p).unwrap();
        assert_eq!((c.ct_mults, c.depth), (0, 0));
    }

    #[test]
    fn x8_two_ways() {
        let sq = Plan::repeated_squaring(3);
        let c = mult_depth_of_plan(&sq).unwrap();
        assert_eq!((c.ct_mults, c.depth), (3, 3));
        assert_eq!(recursive_depth(&sq, sq.root), 3);
        assert_eq!(sq.evaluate(2.0).unwrap(), 256.0);

        let mut seq = Plan::new();
        let x = seq.push(PlanNode::Input);
        let mut acc = x;
        for _ in 0..7 {
            acc = seq.push(PlanNode::Mul(acc, x));
        }
        let c = mult_depth_of_plan(&seq).unwrap();
        assert_eq!((c.ct_mults, c.depth), (7, 7));
        assert_eq!(recursive_depth(&seq, seq.root), 7);
        assert_eq!(seq.evaluate(2.0).unwrap(), 256.0);
    }

    #[test]
    fn constant_products_fold() {
        let mut p = Plan::new();
        let x = p.push(PlanNode::Input);
        let a = p.push(PlanNode::Const(2.0));
        let b = p.push(PlanNode::Const(3.0));
        let ab = p.push(PlanNode::Mul(a, b));
        p.push(PlanNode::Mul(x, ab));
        let c = mult_depth_of_plan(&p).unwrap();
        assert_eq!(c, MultCount { ct_mults: 0, scalar_mults: 1, depth: 1 });
    }

    #[test]
    fn horner_plan_matches_evaluation() {
        let plan = Plan::horner(&[1.0, -2.0, 0.5, 1.0]);
        let c = mult_depth_of_plan(&plan).unwrap();
        // the first step multiplies x by a constant leaf
        assert_eq!(c, MultCount { ct_mults: 2, scalar_mults: 1, depth: 3 });
        let x: f64 = 1.3;
        let want = 1.0 - 2.0 * x + 0.5 * x * x + x.powi(3);
        assert!((plan.evaluate(x).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn cycle_is_rejected() {
        let plan = Plan {
            nodes: vec![PlanNode::Input, PlanNode::Mul(0, 2), PlanNode::Square(1)],
            root: 2,
        };
        assert!(matches!(mult_depth_of_plan(&plan), Err(PolyError::CyclicPlan(_))));
        let self_loop = Plan {
            nodes: vec![PlanNode::Square(0)],
            root: 0,
        };
        assert!(matches!(mult_depth_of_plan(&self_loop), Err(PolyError::CyclicPlan(0))));
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let plan = Plan {
            nodes: vec![PlanNode::Input, PlanNode::Add(0, 9)],
            root: 1,
        };
        assert!(matches!(
            mult_depth_of_plan(&plan),
            Err(PolyError::DanglingReference { node: 1, target: 9 })
        ));
    }

    #[test]
    fn shared_subexpressions_counted_once() {
        let mut p = Plan::new();
        let x = p.push(PlanNode::Input);
        let s = p.push(PlanNode::Square(x));
        p.push(PlanNode::Mul(s, s));
        let c = mult_depth_of_plan(&p).unwrap();
        assert_eq!((c.ct_mults, c.depth), (2, 2));
    }
}
