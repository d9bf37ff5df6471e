//! Clairvoyant offline scheduling.
//!
//! Given every device's availability, round length, co-run opportunity and
//! per-watt saving over a horizon, picking which devices wait for their app
//! (and which train right away) is a 0/1 knapsack: waiting for device i earns
//! `saving_i` but injects a gradient gap `g_i`, and the summed gap of all
//! waiters must stay within the staleness budget. `g_i` comes from the
//! device's own momentum via [`gradient_gap`] at the lag bound of
//! [`lag_upper_bound`]; keeping that *bound* within budget makes the plan
//! feasible regardless of the execution interleaving.
//!
//! [`knapsack_dp`] solves one instance on a discretized capacity axis,
//! [`brute_force_offline`] is the exponential oracle used to validate it,
//! and [`rolling_offline`] chops a whole horizon into look-ahead windows and
//! plans each one.

use crate::error::{Error, Result};
use crate::gradient::{gradient_gap, ModelState};
use crate::scalar::Float;
use serde::{Deserialize, Serialize};

/// One device's slice of an offline instance.
///
/// The device becomes free at `begin`, its co-run opportunity opens at
/// `app_start` (never earlier than `begin`), a round lasts `duration` slots,
/// and co-running saves `saving` watts over running app and round apart.
/// `model` is the momentum state used to price the staleness of waiting.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineUser<F> {
    pub begin: u32,
    pub app_start: u32,
    pub duration: u32,
    pub saving: F,
    pub model: ModelState<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineInstance<F> {
    users: Vec<OfflineUser<F>>,
    staleness_bound: F,
}

impl<F: Float> OfflineInstance<F> {
    pub fn new(users: Vec<OfflineUser<F>>, staleness_bound: F) -> Result<Self> {
        for (i, u) in users.iter().enumerate() {
            if u.app_start < u.begin {
                return Err(Error::Offline(format!(
                    "user {i}: app_start {} before begin {}",
                    u.app_start, u.begin
                )));
            }
            if u.duration == 0 {
                return Err(Error::Offline(format!("user {i}: zero duration")));
            }
            if !u.saving.is_finite() {
                return Err(Error::Offline(format!("user {i}: saving not finite")));
            }
        }
        if !staleness_bound.is_finite() {
            return Err(Error::Offline("staleness_bound not finite".into()));
        }
        Ok(OfflineInstance {
            users,
            staleness_bound,
        })
    }

    pub fn users(&self) -> &[OfflineUser<F>] {
        &self.users
    }

    pub fn staleness_bound(&self) -> F {
        self.staleness_bound
    }

    /// The gradient gap each user would accrue if it waited: its own
    /// momentum priced at [`lag_upper_bound`], the worst case for any
    /// execution order.
    pub fn gaps(&self) -> Vec<F> {
        (0..self.users.len())
            .map(|i| gradient_gap(&self.users[i].model, lag_upper_bound(self, i)))
            .collect()
    }
}

/// Upper bound on how many foreign updates can land while user `i` trains.
///
/// User `j` finishes either at `begin_j + d_j` (trained right away) or at
/// `app_start_j + d_j` (waited to co-run). Whatever the plan, `j` can only
/// bump `i`'s lag if one of those two finish slots falls inside one of `i`'s
/// two possible training intervals, endpoints included. Counting every such
/// `j` bounds the lag of any execution of the instance.
pub fn lag_upper_bound<F: Float>(instance: &OfflineInstance<F>, user: usize) -> u32 {
    let me = &instance.users[user];
    let spans = [
        (me.begin, me.begin + me.duration),
        (me.app_start, me.app_start + me.duration),
    ];
    let inside = |slot: u32| spans.iter().any(|(lo, hi)| slot >= *lo && slot <= *hi);
    instance
        .users
        .iter()
        .enumerate()
        .filter(|(j, u)| {
            *j != user && (inside(u.begin + u.duration) || inside(u.app_start + u.duration))
        })
        .count() as u32
}

/// Which users wait for their app (`true`) and what that earns/costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSolution<F> {
    pub decisions: Vec<bool>,
    pub total_saving: F,
    pub gap_total: F,
}

impl<F: Float> OfflineSolution<F> {
    fn from_decisions(decisions: Vec<bool>, savings: &[F], gaps: &[F]) -> Self {
        let mut total_saving = F::zero();
        let mut gap_total = F::zero();
        for (i, picked) in decisions.iter().enumerate() {
            if *picked {
                total_saving += savings[i];
                gap_total += gaps[i];
            }
        }
        OfflineSolution {
            decisions,
            total_saving,
            gap_total,
        }
    }
}

/// Knapsack DP over a discretized gap axis.
///
/// Capacity is `floor(L_b / resolution)` cells and each user weighs
/// `ceil(g_i / resolution)` cells; rounding the weights up and the capacity
/// down means any cell-feasible pick is feasible in real gap units too, at
/// the price of wasting at most `resolution` per user. Users with
/// non-positive saving are never worth waiting for and are skipped outright.
pub fn knapsack_dp<F: Float>(
    instance: &OfflineInstance<F>,
    resolution: F,
) -> Result<OfflineSolution<F>> {
    if !(resolution > F::zero()) || !resolution.is_finite() {
        return Err(Error::Offline(format!("resolution must be > 0, got {resolution}")));
    }
    if !(instance.staleness_bound > F::zero()) {
        return Err(Error::Offline(format!(
            "staleness_bound must be > 0, got {}",
            instance.staleness_bound
        )));
    }
    let gaps = instance.gaps();
    let n = instance.users.len();

    // Candidates: positive saving and a weight that can fit at all.
    let budget_cells = (instance.staleness_bound / resolution)
        .floor()
        .to_usize()
        .unwrap_or(usize::MAX);
    let mut items: Vec<(usize, usize, F)> = Vec::new(); // (user, weight, saving)
    for i in 0..n {
        let w = (gaps[i] / resolution).ceil().to_usize().unwrap_or(usize::MAX);
        if instance.users[i].saving > F::zero() && w <= budget_cells {
            items.push((i, w, instance.users[i].saving));
        }
    }
    // No subset can use more cells than all items together.
    let cells = budget_cells.min(items.iter().map(|(_, w, _)| *w).sum());

    let mut value = vec![vec![F::zero(); cells + 1]; items.len() + 1];
    for (row, (_, w, s)) in items.iter().enumerate() {
        for y in 0..=cells {
            let skip = value[row][y];
            value[row + 1][y] = if *w <= y {
                skip.max(value[row][y - w] + *s)
            } else {
                skip
            };
        }
    }

    let mut decisions = vec![false; n];
    let mut y = cells;
    for (row, (user, w, s)) in items.iter().enumerate().rev() {
        if value[row + 1][y] != value[row][y] {
            decisions[*user] = true;
            y -= w;
            debug_assert!(value[row + 1][y + w] == value[row][y] + *s);
        }
    }
    let savings: Vec<F> = instance.users.iter().map(|u| u.saving).collect();
    Ok(OfflineSolution::from_decisions(decisions, &savings, &gaps))
}

const BRUTE_FORCE_MAX: usize = 20;

/// Exact maximizer by subset enumeration, for validating [`knapsack_dp`].
/// Feasibility uses the true real-valued gaps (no discretization). Ties go
/// to the lexicographically smallest decision vector.
pub fn brute_force_offline<F: Float>(instance: &OfflineInstance<F>) -> Result<OfflineSolution<F>> {
    let n = instance.users.len();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooManyUsers {
            max: BRUTE_FORCE_MAX,
            got: n,
        });
    }
    let gaps = instance.gaps();
    let savings: Vec<F> = instance.users.iter().map(|u| u.saving).collect();
    let lb = instance.staleness_bound;

    let mut best_mask: u32 = 0;
    let mut best_saving = F::zero();
    for mask in 0u32..(1u32 << n) {
        let mut saving = F::zero();
        let mut gap = F::zero();
        for i in 0..n {
            if mask >> i & 1 == 1 {
                saving += savings[i];
                gap += gaps[i];
            }
        }
        if gap <= lb && (saving > best_saving || (saving == best_saving && lex_less(mask, best_mask)))
        {
            best_saving = saving;
            best_mask = mask;
        }
    }
    let decisions = (0..n).map(|i| best_mask >> i & 1 == 1).collect();
    Ok(OfflineSolution::from_decisions(decisions, &savings, &gaps))
}

/// Is `a`'s decision vector lexicographically before `b`'s? Bit `i` is user
/// `i`, so the first differing user decides, and `0` beats `1`.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    diff != 0 && a >> diff.trailing_zeros() & 1 == 0
}

/// One device's inputs for horizon planning.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDevice<F> {
    /// Round length in slots.
    pub duration: u32,
    /// Momentum state used to price waiting.
    pub model: ModelState<F>,
    /// App sessions as (start slot, length in slots, co-run saving in watts),
    /// sorted by start.
    pub apps: Vec<(u32, u32, F)>,
}

/// One planned training round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedRound {
    pub device: usize,
    pub start: u32,
    pub duration: u32,
    pub co_run: bool,
}

/// One look-ahead window's instance, knapsack answer, and resulting rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutcome<F> {
    pub window_start: u32,
    /// Fleet device index of each instance user.
    pub devices: Vec<usize>,
    pub instance: OfflineInstance<F>,
    pub solution: OfflineSolution<F>,
    pub rounds: Vec<PlannedRound>,
}

/// Plans a whole horizon window by window.
///
/// Within each window, every device that is free and has an app opportunity
/// (an ongoing session, or one starting before the window ends) becomes an
/// instance user; the knapsack picks which of them wait to co-run. Picked
/// users start at their app's start, the rest start as soon as they are
/// free. Devices without an opportunity sit the window out — the plan only
/// ever trains against app sessions, which is what makes it the low-energy
/// reference. Rounds may overrun their window; the device is simply busy
/// that much longer.
pub fn rolling_offline<F: Float>(
    devices: &[OfflineDevice<F>],
    horizon: u32,
    window: u32,
    staleness_bound: F,
    resolution: F,
) -> Result<Vec<WindowOutcome<F>>> {
    if window == 0 {
        return Err(Error::Offline("window must be at least one slot".into()));
    }
    if let Some(max_d) = devices.iter().map(|d| d.duration).max() {
        if window < max_d {
            return Err(Error::Offline(format!(
                "window {window} shorter than longest round {max_d}"
            )));
        }
    }
    let mut free_at = vec![0u32; devices.len()];
    let mut out = Vec::new();
    let mut w0 = 0u32;
    while w0 < horizon {
        let w_end = (w0 + window).min(horizon);
        let mut users = Vec::new();
        let mut ids = Vec::new();
        for (idx, dev) in devices.iter().enumerate() {
            let begin = free_at[idx].max(w0);
            if begin >= w_end {
                continue;
            }
            let opportunity = dev
                .apps
                .iter()
                .filter(|(s, len, _)| *s < w_end && s + len > begin)
                .map(|(s, _, saving)| ((*s).max(begin), *saving))
                .next();
            if let Some((app_start, saving)) = opportunity {
                ids.push(idx);
                users.push(OfflineUser {
                    begin,
                    app_start,
                    duration: dev.duration,
                    saving,
                    model: dev.model.clone(),
                });
            }
        }
        let instance = OfflineInstance::new(users, staleness_bound)?;
        let solution = knapsack_dp(&instance, resolution)?;
        let rounds: Vec<PlannedRound> = instance
            .users()
            .iter()
            .zip(&solution.decisions)
            .zip(&ids)
            .map(|((u, co_run), device)| PlannedRound {
                device: *device,
                start: if *co_run { u.app_start } else { u.begin },
                duration: u.duration,
                co_run: *co_run,
            })
            .collect();
        for r in &rounds {
            free_at[r.device] = r.start + r.duration;
        }
        out.push(WindowOutcome {
            window_start: w0,
            devices: ids,
            instance,
            solution,
            rounds,
        });
        w0 = w0.saturating_add(window);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Plain-text round-trip format, used for golden-file tests. An instance is
//
//   staleness_bound <f>
//   user begin=<u> app_start=<u> duration=<u> saving=<f> lr=<f> beta=<f>
//   theta <f> <f> ...
//   momentum <f> <f> ...
//   (user block repeats)
//
// and a solution is
//
//   decisions 0 1 1 ...
//   total_saving <f>
//   gap_total <f>
//
// Blank lines and lines starting with '#' are ignored.
// ---------------------------------------------------------------------------

impl<F: Float> OfflineInstance<F> {
    pub fn render(&self) -> String {
        let mut s = format!("staleness_bound {}\n", self.staleness_bound);
        for u in &self.users {
            s += &format!(
                "user begin={} app_start={} duration={} saving={} lr={} beta={}\n",
                u.begin, u.app_start, u.duration, u.saving, u.model.lr, u.model.beta
            );
            s += &format!("theta {}\n", join(&u.model.theta));
            s += &format!("momentum {}\n", join(&u.model.momentum));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut bound: Option<F> = None;
        let mut users: Vec<OfflineUser<F>> = Vec::new();
        let mut pending: Option<(u32, u32, u32, F, F, F, Option<Vec<F>>)> = None;

        let mut finish =
            |p: &mut Option<(u32, u32, u32, F, F, F, Option<Vec<F>>)>, momentum: Vec<F>| -> Result<()> {
                let (begin, app_start, duration, saving, lr, beta, theta) =
                    p.take().ok_or_else(|| off("momentum before user"))?;
                let theta = theta.ok_or_else(|| off("momentum before theta"))?;
                users.push(OfflineUser {
                    begin,
                    app_start,
                    duration,
                    saving,
                    model: ModelState::new(theta, momentum, lr, beta)?,
                });
                Ok(())
            };

        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match key {
                "staleness_bound" => bound = Some(num(rest.trim())?),
                "user" => {
                    if pending.is_some() {
                        return Err(off("user block without theta/momentum"));
                    }
                    let f = |name: &str| -> Result<&str> {
                        rest.split_whitespace()
                            .find_map(|kv| kv.strip_prefix(&format!("{name}=")[..]))
                            .ok_or_else(|| off(&format!("user missing {name}")))
                    };
                    pending = Some((
                        int(f("begin")?)?,
                        int(f("app_start")?)?,
                        int(f("duration")?)?,
                        num(f("saving")?)?,
                        num(f("lr")?)?,
                        num(f("beta")?)?,
                        None,
                    ));
                }
                "theta" => match pending.as_mut() {
                    Some(p) => p.6 = Some(vector(rest)?),
                    None => return Err(off("theta before user")),
                },
                "momentum" => finish(&mut pending, vector(rest)?)?,
                other => return Err(off(&format!("unknown key `{other}`"))),
            }
        }
        if pending.is_some() {
            return Err(off("unterminated user block"));
        }
        OfflineInstance::new(users, bound.ok_or_else(|| off("missing staleness_bound"))?)
    }
}

impl<F: Float> OfflineSolution<F> {
    pub fn render(&self) -> String {
        let bits: Vec<&str> = self.decisions.iter().map(|d| if *d { "1" } else { "0" }).collect();
        format!(
            "decisions {}\ntotal_saving {}\ngap_total {}\n",
            bits.join(" "),
            self.total_saving,
            self.gap_total
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut decisions = None;
        let mut total_saving = None;
        let mut gap_total = None;
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            match key {
                "decisions" => {
                    decisions = Some(
                        rest.split_whitespace()
                            .map(|b| match b {
                                "0" => Ok(false),
                                "1" => Ok(true),
                                other => Err(off(&format!("bad decision `{other}`"))),
                            })
                            .collect::<Result<Vec<bool>>>()?,
                    )
                }
                "total_saving" => total_saving = Some(num(rest.trim())?),
                "gap_total" => gap_total = Some(num(rest.trim())?),
                other => return Err(off(&format!("unknown key `{other}`"))),
            }
        }
        Ok(OfflineSolution {
            decisions: decisions.ok_or_else(|| off("missing decisions"))?,
            total_saving: total_saving.ok_or_else(|| off("missing total_saving"))?,
            gap_total: gap_total.ok_or_else(|| off("missing gap_total"))?,
        })
    }
}

fn off(msg: &str) -> Error {
    Error::Offline(msg.to_string())
}

fn join<F: Float>(xs: &[F]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn num<F: Float>(s: &str) -> Result<F> {
    s.parse::<f64>()
        .map(F::of)
        .map_err(|_| off(&format!("bad number `{s}`")))
}

fn int(s: &str) -> Result<u32> {
    s.parse::<u32>().map_err(|_| off(&format!("bad integer `{s}`")))
}

fn vector<F: Float>(s: &str) -> Result<Vec<F>> {
    s.split_whitespace().map(num).collect()
}
