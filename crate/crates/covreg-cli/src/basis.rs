//! Assemble the similarity basis from covariates, labels, networks, and
//! explicit triplet files, with the l1 rescaling convention applied to every
//! non-identity matrix.

use std::fs::File;
use std::io::BufReader;

use covreg::matrix::{parse_triplets, SimilarityBasis, SparseSymMatrix};
use covreg::similarity;

use crate::config::BasisConfig;
use crate::data;
use crate::CliError;

/// Build `{I_p, W_1, ..., W_K}` for `p` subjects from the configured sources.
pub fn build_basis(config: &BasisConfig, p: usize) -> Result<SimilarityBasis<f64>, CliError> {
    let mut matrices: Vec<SparseSymMatrix<f64>> = Vec::new();

    if let Some(path) = &config.covariates {
        let panel = data::load_panel(path)?;
        if panel.data.nrows() != p {
            return Err(CliError::data(format!(
                "{}: {} covariate rows for {} subjects",
                path.display(),
                panel.data.nrows(),
                p
            )));
        }
        for j in 0..panel.data.ncols() {
            let column: Vec<f64> = panel.data.column(j).iter().copied().collect();
            if config.kernel {
                matrices.push(
                    similarity::kernel_similarity(&column, config.bandwidth, config.density)
                        .map_err(|e| {
                            CliError::from(e).with_context(format!(
                                "covariate `{}` (kernel)",
                                panel.names[j]
                            ))
                        })?,
                );
            }
            if config.outer {
                matrices.push(similarity::outerproduct_similarity(&column)?);
            }
        }
    }

    if let Some(path) = &config.labels {
        let labels = data::load_labels(path, p)?;
        matrices.push(similarity::indicator_similarity(&labels)?);
    }

    if let Some(path) = &config.edges {
        let edges = data::load_edges(path)?;
        matrices.push(similarity::edge_similarity(&edges, p)?);
    }

    for path in &config.matrices {
        let file =
            File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let w = parse_triplets::<f64>(BufReader::new(file), p, false)?;
        matrices.push(w);
    }

    if config.rescale {
        matrices = matrices
            .into_iter()
            .map(|w| similarity::rescale_l1(&w))
            .collect::<Result<_, _>>()?;
    }

    SimilarityBasis::with_identity(p, matrices).map_err(CliError::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tmp(name: &str, content: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!("covreg-basis-{}-{name}", std::process::id()));
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn base_config() -> BasisConfig {
        BasisConfig {
            covariates: None,
            kernel: true,
            outer: true,
            bandwidth: 10.0,
            density: 1.0,
            labels: None,
            edges: None,
            matrices: vec![],
            rescale: true,
        }
    }

    #[test]
    fn empty_inputs_yield_identity_only() {
        let basis = build_basis(&base_config(), 5).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(basis.dim(), 5);
    }

    #[test]
    fn covariates_produce_two_constructions_each() {
        let path = tmp(
            "cov.csv",
            "size,value\n0.1,1.0\n0.4,-0.5\n-0.2,0.3\n0.9,0.0\n",
        );
        let mut config = base_config();
        config.covariates = Some(path.clone());
        let basis = build_basis(&config, 4).unwrap();
        // 2 covariates x 2 constructions + identity
        assert_eq!(basis.len(), 5);
        // rescaled: every non-identity matrix has unit l1 norm
        for k in 1..basis.len() {
            approx::assert_relative_eq!(basis.get(k).l1_norm(), 1.0, epsilon = 1e-12);
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn networks_and_matrices_append() {
        let labels = tmp("labels.csv", "subject,label\na,x\nb,x\nc,y\n");
        let edges = tmp("edges.txt", "0 2\n");
        let triplets = tmp("w.txt", "0 1 0.5\n1 2 0.25\n");
        let mut config = base_config();
        config.labels = Some(labels.clone());
        config.edges = Some(edges.clone());
        config.matrices = vec![triplets.clone()];
        let basis = build_basis(&config, 3).unwrap();
        assert_eq!(basis.len(), 4);
        for path in [labels, edges, triplets] {
            std::fs::remove_file(path).ok();
        }
    }

    #[test]
    fn wrong_subject_count_is_a_data_error() {
        let path = tmp("short.csv", "size\n0.1\n0.2\n");
        let mut config = base_config();
        config.covariates = Some(path.clone());
        let err = build_basis(&config, 4).unwrap_err();
        assert!(err.to_string().contains("covariate rows"), "{err}");
        std::fs::remove_file(path).ok();
    }
}
