//! Order-fixed summation: Kahan inside blocks of [`BLOCK`] terms, pairwise
//! across block sums. The block partition depends only on `N`, so the result
//! does not depend on how blocks are spread over threads.

use num_complex::Complex64;

pub const BLOCK: u64 = 4096;

#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: Complex64,
    comp: Complex64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, v: Complex64) {
        let y_re = v.re - self.comp.re;
        let t_re = self.sum.re + y_re;
        self.comp.re = (t_re - self.sum.re) - y_re;
        self.sum.re = t_re;
        let y_im = v.im - self.comp.im;
        let t_im = self.sum.im + y_im;
        self.comp.im = (t_im - self.sum.im) - y_im;
        self.sum.im = t_im;
    }

    pub fn value(&self) -> Complex64 {
        self.sum
    }
}

pub fn pairwise(s: &[Complex64]) -> Complex64 {
    match s.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => s[0],
        n => pairwise(&s[..n / 2]) + pairwise(&s[n / 2..]),
    }
}

/// Sums `term(n)` for `n` in `lo..hi`, one Kahan pass per block, and returns
/// the block sums in order. `lo` must be a multiple of [`BLOCK`].
pub fn block_sums<E, F>(lo: u64, hi: u64, workers: usize, term: F) -> Result<Vec<Complex64>, E>
where
    F: Fn(u64) -> Result<Complex64, E> + Sync,
    E: Send,
{
    debug_assert_eq!(lo % BLOCK, 0);
    if hi <= lo {
        return Ok(Vec::new());
    }
    let blocks = (hi - lo).div_ceil(BLOCK);
    let one_block = |b: u64| -> Result<Complex64, E> {
        let start = lo + b * BLOCK;
        let end = (start + BLOCK).min(hi);
        let mut k = Kahan::default();
        for n in start..end {
            k.add(term(n)?);
        }
        Ok(k.value())
    };
    let workers = workers.max(1).min(blocks as usize);
    if workers == 1 {
        return (0..blocks).map(one_block).collect();
    }
    let per = blocks.div_ceil(workers as u64);
    let parts: Vec<Result<Vec<Complex64>, E>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let one_block = &one_block;
                scope.spawn(move || {
                    let from = w * per;
                    let to = ((w + 1) * per).min(blocks);
                    (from..to).map(one_block).collect::<Result<Vec<_>, E>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("summation worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(blocks as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}
