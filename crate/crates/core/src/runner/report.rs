//! Report writers. All numeric fields use fixed formatting so a given
//! config and seed always produce byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::fixed::Energy;
use crate::market::SettlementRecord;

use super::{DriftRow, GasUsageRow, RewardRow, TrainMode};

fn create(path: &Path) -> std::io::Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// `gas_usage.csv`: `op,users,mean_gas,max_gas`.
pub fn write_gas_csv(path: &Path, rows: &[GasUsageRow]) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "op,users,mean_gas,max_gas")?;
    for r in rows {
        writeln!(out, "{},{},{:.2},{}", r.op, r.users, r.mean_gas, r.max_gas)?;
    }
    Ok(())
}

/// `settlements.csv`: one row per settled production entry.
pub fn write_settlements_csv(path: &Path, records: &[SettlementRecord]) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(
        out,
        "slot,seller,buyer,matched_kwh,price,payment,delivered_kwh,forfeit"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.slot,
            r.seller.0,
            r.buyer.0,
            r.matched_energy,
            r.unit_price,
            r.payment,
            r.delivered_energy,
            r.forfeit
        )?;
    }
    Ok(())
}

/// `rewards.csv`: `episode,household,reward,mode,seed`.
pub fn write_rewards_csv(
    path: &Path,
    rows: &[RewardRow],
    mode: TrainMode,
    seed: u64,
) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "episode,household,reward,mode,seed")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{},{}",
            r.episode,
            r.household,
            r.reward,
            mode.label(),
            seed
        )?;
    }
    Ok(())
}

/// `metrics.csv`: `episode,household,reward,q_loss,policy_loss`.
pub fn write_metrics_csv(path: &Path, rows: &[RewardRow]) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "episode,household,reward,q_loss,policy_loss")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            r.episode, r.household, r.reward, r.q_loss, r.policy_loss
        )?;
    }
    Ok(())
}

/// `federation.csv`: `episode,household,l2_drift`.
pub fn write_federation_csv(path: &Path, rows: &[DriftRow]) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "episode,household,l2_drift")?;
    for r in rows {
        writeln!(out, "{},{},{:.6}", r.episode, r.household, r.l2_drift)?;
    }
    Ok(())
}

/// `pool.csv`: committed totals right before each slot settled.
pub fn write_pool_csv(path: &Path, rows: &[(u64, Energy, Energy)]) -> std::io::Result<()> {
    let mut out = create(path)?;
    writeln!(out, "slot,total_production_kwh,total_consumption_kwh")?;
    for (slot, production, consumption) in rows {
        writeln!(out, "{slot},{production},{consumption}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::Currency;
    use crate::profile::TokenId;

    #[test]
    fn csv_outputs_are_byte_exact() {
        let dir = tempfile::tempdir().unwrap();

        let gas = dir.path().join("gas_usage.csv");
        write_gas_csv(
            &gas,
            &[GasUsageRow {
                op: "settle_entry".into(),
                users: 10,
                mean_gas: 54125.5,
                max_gas: 61000,
            }],
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&gas).unwrap(),
            "op,users,mean_gas,max_gas\nsettle_entry,10,54125.50,61000\n"
        );

        let settlements = dir.path().join("settlements.csv");
        write_settlements_csv(
            &settlements,
            &[SettlementRecord {
                slot: 3,
                seller: TokenId(0),
                buyer: TokenId(2),
                matched_energy: Energy(1_500),
                unit_price: Currency(200_000),
                payment: Currency(300_000),
                delivered_energy: Energy(1_500),
                forfeit: Currency::ZERO,
            }],
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&settlements).unwrap(),
            "slot,seller,buyer,matched_kwh,price,payment,delivered_kwh,forfeit\n\
             3,0,2,1.500,0.200000,0.300000,1.500,0.000000\n"
        );

        let rewards = dir.path().join("rewards.csv");
        write_rewards_csv(
            &rewards,
            &[RewardRow {
                episode: 0,
                household: 1,
                reward: -2.5,
                q_loss: 0.1,
                policy_loss: 0.2,
            }],
            TrainMode::Federated,
            42,
        )
        .unwrap();
        assert_eq!(
            std::fs::read_to_string(&rewards).unwrap(),
            "episode,household,reward,mode,seed\n0,1,-2.500000,federated,42\n"
        );
    }
}
