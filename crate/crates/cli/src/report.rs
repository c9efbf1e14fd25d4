//! CSV layouts. Every number is written with the shortest round-trip
//! representation, so CSV and JSON carry identical values.

use std::io::Write;

use crate::commands::{EquilibriumOutput, MeanFieldOutput, VerifyOutput};
use crate::error::CliError;

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `agent,asset,psi_star,phi_star,aggregation_constant,reduced_capital,feasible,theta_hat,residual,unique`.
pub fn equilibrium_csv<W: Write>(out: &EquilibriumOutput, w: W) -> Result<(), CliError> {
    let r = &out.result;
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "agent",
        "asset",
        "psi_star",
        "phi_star",
        "aggregation_constant",
        "reduced_capital",
        "feasible",
        "theta_hat",
        "residual",
        "unique",
    ])
    .map_err(csv_err)?;
    for (i, (psi, phi)) in r.psi_star.iter().zip(&r.phi_star).enumerate() {
        for (k, (p, f)) in psi.iter().zip(phi).enumerate() {
            w.write_record([
                i.to_string(),
                k.to_string(),
                p.to_string(),
                f.to_string(),
                opt(r.aggregation_constants.as_ref().map(|c| c[i])),
                r.reduced_capitals[i].to_string(),
                r.feasibility[i].feasible.to_string(),
                r.theta_hat.to_string(),
                r.residual.to_string(),
                r.unique.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `agent,family,asset,parameter,gap,std_error,agent_pass`; one row per deviation.
pub fn verify_csv<W: Write>(out: &VerifyOutput, w: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["agent", "family", "asset", "parameter", "gap", "std_error", "agent_pass"]).map_err(csv_err)?;
    for a in &out.agents {
        for row in &a.rows {
            w.write_record([
                a.agent.to_string(),
                row.family.clone(),
                row.asset.map(|k| k.to_string()).unwrap_or_default(),
                row.parameter.to_string(),
                opt(row.gap),
                row.std_error.to_string(),
                a.pass.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `atom,xi,delta,theta,prob,reduced_capital,asset,psi_time0,phi_time0`.
pub fn meanfield_atoms_csv<W: Write>(out: &MeanFieldOutput, w: W) -> Result<(), CliError> {
    let m = &out.equilibrium;
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["atom", "xi", "delta", "theta", "prob", "reduced_capital", "asset", "psi_time0", "phi_time0"])
        .map_err(csv_err)?;
    for (j, a) in m.atoms.iter().enumerate() {
        for (k, (p, f)) in m.psi_time0[j].iter().zip(&m.phi_time0[j]).enumerate() {
            w.write_record([
                j.to_string(),
                a.xi.to_string(),
                a.delta.to_string(),
                a.theta.to_string(),
                a.prob.to_string(),
                m.reduced_capitals[j].to_string(),
                k.to_string(),
                p.to_string(),
                f.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
