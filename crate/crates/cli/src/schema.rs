use std::path::Path;

use anyhow::{Context, Result};

use axmc_core::{ColumnDef, ColumnKind, Schema};

use crate::RunArgs;

/// The sidecar if given, else a schema from the CSV header: every column
/// numeric except the target and those listed as categorical.
pub fn load(args: &RunArgs) -> Result<Schema> {
    if let Some(p) = &args.schema {
        let text = std::fs::read_to_string(p)
            .with_context(|| format!("reading schema {}", p.display()))?;
        return serde_json::from_str(&text)
            .with_context(|| format!("parsing schema {}", p.display()));
    }
    let target = args
        .target
        .clone()
        .expect("clap requires --target without --schema");
    let header = read_header(&args.data)?;
    for name in args
        .categorical
        .iter()
        .chain([&target])
        .chain(&args.protected)
    {
        anyhow::ensure!(
            header.contains(name),
            "column `{name}` not in {}",
            args.data.display()
        );
    }
    let columns = header
        .into_iter()
        .map(|name| {
            let categorical = name == target
                || args.protected.as_ref() == Some(&name)
                || args.categorical.contains(&name);
            ColumnDef {
                name,
                kind: if categorical {
                    ColumnKind::Categorical
                } else {
                    ColumnKind::Numeric
                },
            }
        })
        .collect();
    Ok(Schema {
        columns,
        target,
        protected: args.protected.clone(),
        positive_label: args.positive.clone(),
        include_protected: false,
    })
}

fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(r.headers()?.iter().map(|h| h.trim().to_string()).collect())
}
