//! The assembled SDP rows are one linear functional per monomial; this
//! oracle plugs arbitrary Gram and free assignments into both the rows and
//! the polynomial identity they encode and demands exact agreement.

use critsos::critical::{generators, GeneratorMode, Problem};
use critsos::polyring::{Monomial, Polynomial};
use critsos::sosrelax::{assemble_relaxation, monomial_basis};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn int(c: i64) -> BigRational {
    BigRational::from(BigInt::from(c))
}

fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, max_deg: u32) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    for _ in 0..rng.random_range(1..=4) {
        let mut exps = vec![0u32; nvars];
        let mut left = max_deg;
        for e in exps.iter_mut() {
            *e = rng.random_range(0..=left.min(2));
            left -= *e;
        }
        let c = rng.random_range(-3i64..=3);
        if c != 0 {
            p = &p + &Polynomial::from_term(nvars, Monomial::from_exponents(exps), int(c));
        }
    }
    p
}

#[test]
#[allow(clippy::needless_range_loop)] // symmetric fill writes m[i][j] and m[j][i]
fn rows_encode_the_polynomial_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_a55e);
    for instance in 0..10 {
        let n = rng.random_range(1usize..=3);
        let s = rng.random_range(0usize..=2);
        let vars: Vec<String> = (0..n).map(|i| format!("x{}", i + 1)).collect();
        let f = random_poly(&mut rng, n, 3);
        let gs: Vec<Polynomial> = (0..s).map(|_| random_poly(&mut rng, n, 2)).collect();
        let p = Problem::new(vars, f, gs).unwrap();
        let gens = generators(&p, GeneratorMode::Critical).unwrap();
        let d = p.objective().degree().div_ceil(2).max(1) + rng.random_range(0..=1);
        let relax = assemble_relaxation(&p, &gens, d).unwrap();

        // Arbitrary symmetric integer Gram matrices and integer free values:
        // small integers so every float operation below is exact.
        let grams: Vec<Vec<Vec<i64>>> = relax
            .sdp
            .block_sizes
            .iter()
            .map(|&sz| {
                let mut m = vec![vec![0i64; sz]; sz];
                for i in 0..sz {
                    for j in i..sz {
                        let v = rng.random_range(-3i64..=3);
                        m[i][j] = v;
                        m[j][i] = v;
                    }
                }
                m
            })
            .collect();
        let free: Vec<i64> = (0..relax.sdp.num_free)
            .map(|_| rng.random_range(-3i64..=3))
            .collect();

        // The polynomial the assignment denotes:
        // Gamma + sum_e (b^T Q b) g^e + sum_J phi_J gen_J.
        let mut denoted = Polynomial::constant(n, int(free[relax.gamma_index]));
        for term in &relax.preordering {
            let q = &grams[term.block];
            let mut sigma = Polynomial::zero(n);
            for (i, bi) in term.basis.iter().enumerate() {
                for (j, bj) in term.basis.iter().enumerate() {
                    if q[i][j] != 0 {
                        sigma = &sigma + &Polynomial::from_term(n, bi.mul(bj), int(q[i][j]));
                    }
                }
            }
            denoted = &denoted + &(&sigma * &term.product);
        }
        for it in &relax.ideal {
            let mut phi = Polynomial::zero(n);
            for (k, mu) in it.multiplier_basis.iter().enumerate() {
                let c = free[it.free_start + k];
                if c != 0 {
                    phi = &phi + &Polynomial::from_term(n, mu.clone(), int(c));
                }
            }
            denoted = &denoted + &(&phi * &it.generator);
        }

        // Row by row: applying the stored functional to the assignment gives
        // the denoted polynomial's coefficient at the row's monomial.
        assert_eq!(relax.sdp.rows.len(), relax.row_monomials.len());
        for (row, mono) in relax.sdp.rows.iter().zip(&relax.row_monomials) {
            let mut lhs = 0.0f64;
            for e in &row.entries {
                let x = grams[e.block][e.i][e.j] as f64;
                lhs += if e.i == e.j {
                    e.value * x
                } else {
                    2.0 * e.value * x
                };
            }
            for &(k, c) in &row.free {
                lhs += c * free[k] as f64;
            }
            assert_eq!(
                BigRational::from_float(lhs).unwrap(),
                denoted.coeff(mono),
                "instance {instance}, row {}",
                row.label
            );
        }

        // Monomials without a row were pruned as 0 = 0: the denoted
        // polynomial cannot touch them, whatever the assignment.
        for mono in monomial_basis(n, 2 * d) {
            if !relax.row_monomials.contains(&mono) {
                assert!(
                    denoted.coeff(&mono).is_zero() && p.objective().coeff(&mono).is_zero(),
                    "instance {instance}: pruned monomial is reachable"
                );
            }
        }
    }
}
