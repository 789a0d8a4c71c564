use std::str::FromStr;

/// `min:max:count` evenly spaced densities, `0 < min < max <= 1`, `count >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoGrid(pub Vec<f64>);

impl FromStr for RhoGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else {
            return Err(format!("expected min:max:count, got `{s}`"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad minimum `{lo}`"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad maximum `{hi}`"))?;
        let count: usize = count.trim().parse().map_err(|_| format!("bad count `{count}`"))?;
        if !(lo > 0.0 && lo < hi && hi <= 1.0) {
            return Err(format!("need 0 < min < max <= 1, got {lo}:{hi}"));
        }
        if count < 2 {
            return Err(format!("need at least 2 grid points, got {count}"));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let mut v: Vec<f64> = (0..count).map(|i| lo + i as f64 * step).collect();
        v[count - 1] = hi;
        Ok(RhoGrid(v))
    }
}

/// `start:step:stop` (inclusive) or a comma-separated list of sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct NList(pub Vec<usize>);

impl FromStr for NList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad size `{t}`"));
        let v: Vec<usize> = match s.split(':').collect::<Vec<_>>().as_slice() {
            [start, step, stop] => {
                let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
                if step == 0 || start > stop {
                    return Err(format!("need step > 0 and start <= stop, got {s}"));
                }
                (start..=stop).step_by(step).collect()
            }
            [list] => list.split(',').map(num).collect::<Result<_, _>>()?,
            _ => return Err(format!("expected start:step:stop or a comma list, got `{s}`")),
        };
        if v.contains(&0) {
            return Err("sizes must be positive".into());
        }
        Ok(NList(v))
    }
}
