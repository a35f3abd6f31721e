use num_traits::ToPrimitive;

use crate::datalang::{resolve, Env, Evaluator, Expr, Rational, TypeCtx, Value};
use crate::speclang::parse_expr;
use crate::statespace::{ActionLabel, Plts};
use crate::symbol::Sym;

use super::SimError;

#[derive(Clone, Debug)]
struct Rule {
    act: u32,
    params: Vec<Sym>,
    expr: Expr,
}

/// Gains per action and the actions that end a round.
///
/// Text form: `;`-separated items, each either `act = expr`,
/// `act(x, y) = expr` with the action arguments bound to `x, y`, or
/// `@round = act, act`. Without `@round`, every rewarded action ends a
/// round. Example: `points(n) = n - 1` for the reel game,
/// `win = 1; lose = -1; @round = win, hold` for the hold model.
#[derive(Clone, Debug)]
pub struct RewardSpec {
    text: String,
    rules: Vec<Rule>,
    round_end: Vec<bool>,
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::Reward(msg.into())
}

impl RewardSpec {
    pub fn parse(text: &str, plts: &Plts) -> Result<RewardSpec, SimError> {
        let mut rules = vec![];
        let mut round: Option<Vec<bool>> = None;
        for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (lhs, rhs) = item
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `=` in `{item}`")))?;
            let (lhs, rhs) = (lhs.trim(), rhs.trim());
            if lhs == "@round" {
                let mut set = vec![false; plts.actions.len()];
                for name in rhs.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let a = plts
                        .action_id(name)
                        .ok_or_else(|| bad(format!("unknown action `{name}`")))?;
                    set[a as usize] = true;
                }
                round = Some(set);
                continue;
            }
            let (name, params) = match lhs.split_once('(') {
                Some((n, rest)) => {
                    let inner = rest
                        .strip_suffix(')')
                        .ok_or_else(|| bad(format!("unbalanced parenthesis in `{lhs}`")))?;
                    let ps: Vec<Sym> = inner
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(Sym::new)
                        .collect();
                    (n.trim(), ps)
                }
                None => (lhs, vec![]),
            };
            let act = plts
                .action_id(name)
                .ok_or_else(|| bad(format!("unknown action `{name}`")))?;
            let sorts = &plts.actions[act as usize].args;
            if !params.is_empty() && params.len() != sorts.len() {
                return Err(bad(format!("`{name}` takes {} arguments", sorts.len())));
            }
            let raw = parse_expr(rhs).map_err(|e| bad(format!("`{rhs}`: {e}")))?;
            let mut ctx = TypeCtx::new(&plts.sorts, &plts.funcs);
            ctx.vars = params.iter().copied().zip(sorts.iter().cloned()).collect();
            let (expr, sort) = resolve(&raw, &ctx).map_err(|e| bad(format!("`{rhs}`: {e}")))?;
            if !sort.is_numeric() {
                return Err(bad(format!("`{rhs}` is not a number")));
            }
            rules.push(Rule { act, params, expr });
        }
        let round_end = round.unwrap_or_else(|| {
            let mut set = vec![false; plts.actions.len()];
            for r in &rules {
                set[r.act as usize] = true;
            }
            set
        });
        Ok(RewardSpec {
            text: text.to_string(),
            rules,
            round_end,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn ends_round(&self, l: &ActionLabel) -> bool {
        self.round_end.get(l.act as usize).copied().unwrap_or(false)
    }

    /// Gain of taking a transition with this label; unrewarded actions
    /// gain nothing.
    pub fn gain(&self, plts: &Plts, l: &ActionLabel) -> Result<Rational, SimError> {
        let Some(rule) = self.rules.iter().find(|r| r.act == l.act) else {
            return Ok(Rational::from_integer(0));
        };
        let env: Vec<(Sym, Value)> = rule.params.iter().copied().zip(l.args.iter().cloned()).collect();
        Evaluator::new(&plts.funcs, &plts.sorts)
            .rational(&Env::new(&env), &rule.expr)
            .map_err(|e| bad(format!("{}: {e}", plts.label_string(l))))
    }

    pub fn gain_f64(&self, plts: &Plts, l: &ActionLabel) -> Result<f64, SimError> {
        let g = self.gain(plts, l)?;
        Ok(g.numer().to_f64().unwrap_or(f64::NAN) / g.denom().to_f64().unwrap_or(f64::NAN))
    }
}
