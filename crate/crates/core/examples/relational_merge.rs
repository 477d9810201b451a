//! Joining a one-to-one table and aggregating a one-to-many table onto the
//! main table, on the four-row example with keys 14011..14013.
//!
//!     cargo run --example relational_merge

use autosmart::data::{ColumnData, DatasetBundle, RelType, RelationSpec, Table};
use autosmart::ingest::table_to_tsv;
use autosmart::merge::{merge_all, plan_merge};

fn keys(cells: &[&str]) -> ColumnData {
    ColumnData::categorical_raw("c_01", cells.iter().map(|c| Some(*c)))
}

fn rel(right: &str, rel_type: RelType) -> RelationSpec {
    RelationSpec {
        left_table: "main".into(),
        right_table: right.into(),
        left_key: "c_01".into(),
        right_key: "c_01".into(),
        rel_type,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let main = Table::new("main", vec![keys(&["14011", "14012", "14011", "14013"])])?;
    let profile = Table::new(
        "profile",
        vec![
            keys(&["14012", "14011"]),
            ColumnData::numerical("f_1", [Some(1.2), Some(3.6)]),
        ],
    )?;
    let events = Table::new(
        "events",
        vec![
            keys(&["14011", "14012", "14011"]),
            ColumnData::numerical("f_2", [Some(2.4), Some(0.5), Some(2.2)]),
        ],
    )?;
    let bundle = DatasetBundle {
        main,
        related: vec![profile, events],
        relations: vec![
            rel("profile", RelType::OneToOne),
            rel("events", RelType::OneToMany),
        ],
        labels: None,
        time_budget_s: 10.0,
        mem_budget_bytes: 1 << 20,
    };
    let plan = plan_merge(&bundle)?;
    for step in &plan.steps {
        let r = &step.relation;
        println!(
            "{} <- {} ({}): {:?}",
            r.left_table,
            r.right_table,
            r.rel_type.as_str(),
            step.recipes
        );
    }
    print!("{}", table_to_tsv(&merge_all(&bundle, &plan)?));
    Ok(())
}
