//! Mechanical derivation builders shared by the pipelines: locating stored
//! relators up to rotation/inversion with the conjugation dressing, and the
//! commutator-transport identity that moves a commutation relation along a
//! stable letter's action.

use crate::error::{Error, Result};
use crate::words::{
    free_reduce, DerivationFactor, Presentation, Word,
};

/// Find a stored relator equal to `shape` up to rotation and inversion,
/// returning `(index, conjugator, inverted)` with
/// `conjugator * relator^(+-1) * conjugator^-1 = shape`.
pub fn locate_relator(p: &Presentation, shape: &Word) -> Result<(usize, Word, bool)> {
    let shape = free_reduce(shape);
    for (i, r) in p.relators().iter().enumerate() {
        for k in 0..r.len() {
            let prefix = Word::from_letters(r.letters()[..k].to_vec());
            if free_reduce(&r.rotated(k)) == shape {
                return Ok((i, prefix.inverse(), false));
            }
            let inv = r.inverse();
            let prefix_inv = Word::from_letters(inv.letters()[..k].to_vec());
            if free_reduce(&inv.rotated(k)) == shape {
                return Ok((i, prefix_inv.inverse(), true));
            }
        }
    }
    Err(Error::Other(format!("no relator matches shape {}", p.display_word(&shape))))
}

/// Dress a located factor so its expansion is `outer * shape^(+-1) * outer^-1`:
/// since (c R c^-1)^-1 = c R^-1 c^-1, inversion keeps the conjugator.
pub fn shaped(p: &Presentation, shape: &Word, outer: &Word, invert: bool) -> Result<DerivationFactor> {
    let (idx, dress, inv) = locate_relator(p, shape)?;
    // expansion of (idx, inv, dress) is exactly `shape`; inverting the
    // factor gives shape^-1 with the same conjugator.
    Ok(DerivationFactor {
        relator: idx,
        inverted: inv ^ invert,
        conjugator: free_reduce(&outer.concat(&dress)),
    })
}

/// Derivation of the transported commutator `[x', y']` from
/// `rho_a = t x t^-1 x'^-1`, `rho_b = t y t^-1 y'^-1` and `rho = [x, y]`,
/// where `x`, `y`, `x'`, `y'` are words and `t` a single generator:
///
/// [x', y'] = rho_a^-1 * (txt^-1) rho_b^-1 (txt^-1)^-1 * t rho t^-1
///            * rho_b * y' rho_a y'^-1
pub fn transport_commutator(
    p: &Presentation,
    t: usize,
    x: &Word,
    x_img: &Word,
    y: &Word,
    y_img: &Word,
) -> Result<Vec<DerivationFactor>> {
    let tw = Word::single(t);
    let rho_a = free_reduce(
        &tw.concat(x).concat(&tw.inverse()).concat(&x_img.inverse()),
    );
    let rho_b = free_reduce(
        &tw.concat(y).concat(&tw.inverse()).concat(&y_img.inverse()),
    );
    let rho = Word::commutator(x, y);
    let txt = free_reduce(&tw.concat(x).concat(&tw.inverse()));
    let factors = vec![
        shaped(p, &rho_a, &Word::empty(), true)?,
        shaped(p, &rho_b, &txt, true)?,
        shaped(p, &rho, &tw, false)?,
        shaped(p, &rho_b, &Word::empty(), false)?,
        shaped(p, &rho_a, y_img, false)?,
    ];
    Ok(factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{expand_derivation, Letter, Sign};

    #[test]
    fn locate_rotated_and_inverted() {
        let mut p = Presentation::new(&["a", "b"]).unwrap();
        p.push_relator(Word::commutator(&Word::single(0), &Word::single(1))).unwrap();
        let shape = Word::commutator(&Word::single(1), &Word::single(0)); // [b, a]
        let (idx, conj, inv) = locate_relator(&p, &shape).unwrap();
        let body = if inv { p.relators()[idx].inverse() } else { p.relators()[idx].clone() };
        assert_eq!(body.conjugated_by(&conj), shape);
    }

    #[test]
    fn transport_identity_expands_correctly() {
        // base x, y, x', y'; stable t with t x t^-1 = x', t y t^-1 = y',
        // and [x, y]; transported relator [x', y'].
        let mut p = Presentation::new(&["x", "y", "xp", "yp", "t"]).unwrap();
        let (x, y, xp, yp, t) = (0, 1, 2, 3, 4);
        let tw = Word::single(t);
        p.push_relator(
            tw.concat(&Word::single(x)).concat(&tw.inverse()).concat(&Word::single(xp).inverse()),
        )
        .unwrap();
        p.push_relator(
            tw.concat(&Word::single(y)).concat(&tw.inverse()).concat(&Word::single(yp).inverse()),
        )
        .unwrap();
        p.push_relator(Word::commutator(&Word::single(x), &Word::single(y))).unwrap();
        let d = transport_commutator(
            &p,
            t,
            &Word::single(x),
            &Word::single(xp),
            &Word::single(y),
            &Word::single(yp),
        )
        .unwrap();
        let target = Word::commutator(&Word::single(xp), &Word::single(yp));
        assert_eq!(expand_derivation(&d, p.relators()).unwrap(), target);
    }

    #[test]
    fn transport_with_signed_images() {
        // t x t^-1 = y^-1, t y t^-1 = x, [x, y]: transported [y^-1, x]
        let mut p = Presentation::new(&["x", "y", "t"]).unwrap();
        let (x, y, t) = (0, 1, 2);
        let tw = Word::single(t);
        let ymin = Word::letter(Letter::new(y, Sign::Minus));
        p.push_relator(tw.concat(&Word::single(x)).concat(&tw.inverse()).concat(&ymin.inverse()))
            .unwrap();
        p.push_relator(
            tw.concat(&Word::single(y)).concat(&tw.inverse()).concat(&Word::single(x).inverse()),
        )
        .unwrap();
        p.push_relator(Word::commutator(&Word::single(x), &Word::single(y))).unwrap();
        let d = transport_commutator(&p, t, &Word::single(x), &ymin, &Word::single(y), &Word::single(x))
            .unwrap();
        let target = Word::commutator(&ymin, &Word::single(x));
        assert_eq!(expand_derivation(&d, p.relators()).unwrap(), target);
    }
}
