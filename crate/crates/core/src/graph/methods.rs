//! The sparse-graph methods: SpiecEasi (MB and glasso), SPRING and gCoda.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ebic::ebic_select;
use super::glasso::{graphical_lasso_path_lenient, GlassoSettings};
use super::neighborhood::{neighborhood_path_from_correlation, standardized_gram, CombineRule};
use super::network::{BinaryNetwork, Provenance};
use super::path::lambda_path;
use super::stars::{stars_select, PathFitter, StarsParams, StarsSelection};
use crate::corr::latent_correlation;
use crate::data::{clr_transform, composition_for, to_composition, CountTable};
use crate::error::{Error, Result};
use crate::method::{to_record, Method, MethodResult, SelectionInfo};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpiecEasiMode {
    Mb,
    Glasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiecEasiParams {
    pub lambda_min_ratio: f64,
    pub nlambda: usize,
    pub rep_num: usize,
    /// Worker hint; execution uses the pipeline's worker pool.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ncores: Option<usize>,
    /// Pseudo-count added before the CLR transform.
    pub pseudo: f64,
}

impl SpiecEasiParams {
    pub fn mb() -> Self {
        Self {
            lambda_min_ratio: 1e-2,
            nlambda: 15,
            rep_num: 20,
            ncores: Some(4),
            pseudo: 0.5,
        }
    }

    pub fn glasso() -> Self {
        Self {
            lambda_min_ratio: 1e-2,
            nlambda: 15,
            rep_num: 50,
            ncores: None,
            pseudo: 0.5,
        }
    }

    pub fn for_mode(mode: SpiecEasiMode) -> Self {
        match mode {
            SpiecEasiMode::Mb => Self::mb(),
            SpiecEasiMode::Glasso => Self::glasso(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringParams {
    pub rmethod: String,
    pub quantitative: bool,
    pub ncores: usize,
    pub lambdaseq: String,
    pub lambda_min_ratio: f64,
    pub nlambda: usize,
    pub rep_num: usize,
}

impl Default for SpringParams {
    fn default() -> Self {
        Self {
            rmethod: "original".into(),
            quantitative: true,
            ncores: 5,
            lambdaseq: "data-specific".into(),
            lambda_min_ratio: 1e-2,
            nlambda: 15,
            rep_num: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GcodaParams {
    pub counts: bool,
    pub pseudo: f64,
    pub lambda_min_ratio: f64,
    pub nlambda: usize,
    pub ebic_gamma: f64,
}

impl Default for GcodaParams {
    fn default() -> Self {
        Self {
            counts: false,
            pseudo: 0.5,
            lambda_min_ratio: 1e-4,
            nlambda: 15,
            ebic_gamma: 0.5,
        }
    }
}

struct ClrNeighborhoodFitter {
    clr: Array2<f64>,
}

impl PathFitter for ClrNeighborhoodFitter {
    fn n_samples(&self) -> usize {
        self.clr.nrows()
    }
    fn n_nodes(&self) -> usize {
        self.clr.ncols()
    }
    fn fit_path(&self, rows: &[usize], lambdas: &[f64]) -> Result<Vec<Array2<u8>>> {
        let sub = stats::select_rows(self.clr.view(), rows);
        let r = standardized_gram(sub.view());
        let path = neighborhood_path_from_correlation(r.view(), lambdas);
        Ok((0..lambdas.len()).map(|k| path.network(k, CombineRule::Or)).collect())
    }
}

struct ClrGlassoFitter {
    clr: Array2<f64>,
}

impl PathFitter for ClrGlassoFitter {
    fn n_samples(&self) -> usize {
        self.clr.nrows()
    }
    fn n_nodes(&self) -> usize {
        self.clr.ncols()
    }
    fn fit_path(&self, rows: &[usize], lambdas: &[f64]) -> Result<Vec<Array2<u8>>> {
        let sub = stats::select_rows(self.clr.view(), rows);
        let r = standardized_gram(sub.view());
        // a failed fit at a tiny penalty reuses the previous support
        let fits = graphical_lasso_path_lenient(r.view(), lambdas, GlassoSettings::default());
        let mut out: Vec<Array2<u8>> = Vec::with_capacity(fits.len());
        for fit in fits {
            let support = match fit {
                Ok(f) => f.support(),
                Err(e) => match out.last() {
                    Some(prev) => prev.clone(),
                    None => return Err(e),
                },
            };
            out.push(support);
        }
        Ok(out)
    }
}

struct LatentNeighborhoodFitter<'a> {
    table: &'a CountTable,
}

impl PathFitter for LatentNeighborhoodFitter<'_> {
    fn n_samples(&self) -> usize {
        self.table.n_samples()
    }
    fn n_nodes(&self) -> usize {
        self.table.n_taxa()
    }
    fn fit_path(&self, rows: &[usize], lambdas: &[f64]) -> Result<Vec<Array2<u8>>> {
        let sub = self.table.select_samples(rows);
        let r = latent_correlation(&sub)?;
        let path = neighborhood_path_from_correlation(r.values.view(), lambdas);
        Ok((0..lambdas.len()).map(|k| path.network(k, CombineRule::Or)).collect())
    }
}

fn clr_matrix(t: &CountTable, pseudo: f64) -> Result<Array2<f64>> {
    Ok(clr_transform(&to_composition(t, pseudo)?)?.values)
}

fn check_path_params(nlambda: usize, rep_num: usize) -> Result<()> {
    if nlambda == 0 || rep_num == 0 {
        return Err(Error::Estimator(format!(
            "nlambda and rep_num must be positive (got {nlambda}, {rep_num})"
        )));
    }
    Ok(())
}

fn stars_info(sel: &StarsSelection, path: &[f64]) -> SelectionInfo {
    SelectionInfo {
        lambda: Some(sel.lambda),
        path: path.to_vec(),
        instability: sel.instability.clone(),
        ebic: Vec::new(),
        flagged: sel.flagged,
        note: sel
            .flagged
            .then(|| "no penalty met the stability threshold; most stable used".into()),
    }
}

/// CLR → correlation → λ-path → StARS over neighborhood selection or glasso.
pub fn spieceasi_fit(
    t: &CountTable,
    mode: SpiecEasiMode,
    params: &SpiecEasiParams,
    seed: u64,
) -> Result<MethodResult> {
    check_path_params(params.nlambda, params.rep_num)?;
    let clr = clr_matrix(t, params.pseudo)?;
    let r = standardized_gram(clr.view());
    let path = lambda_path(r.view(), params.nlambda, params.lambda_min_ratio)?;
    let stars = StarsParams {
        rep_num: params.rep_num,
        seed,
        ..StarsParams::default()
    };
    let (method, sel) = match mode {
        SpiecEasiMode::Mb => (
            Method::SeMb,
            stars_select(&ClrNeighborhoodFitter { clr }, &path, &stars)?,
        ),
        SpiecEasiMode::Glasso => (
            Method::SeGlasso,
            stars_select(&ClrGlassoFitter { clr }, &path, &stars)?,
        ),
    };
    let net = BinaryNetwork::new(
        sel.adjacency.clone(),
        t.taxa().to_vec(),
        Provenance {
            method: method.as_str().into(),
            lambda: Some(sel.lambda),
            detail: Some("stars".into()),
        },
    )?;
    Ok(MethodResult::sparse(
        method,
        to_record(params),
        net,
        stars_info(&sel, &path.values),
    ))
}

/// mclr → rank-based latent correlation → λ-path → StARS over correlation-driven
/// neighborhood selection.
pub fn spring_fit(t: &CountTable, params: &SpringParams, seed: u64) -> Result<MethodResult> {
    check_path_params(params.nlambda, params.rep_num)?;
    if params.rmethod != "original" {
        return Err(Error::Estimator(format!(
            "unsupported SPRING rank method {:?}; only \"original\" is implemented",
            params.rmethod
        )));
    }
    if params.lambdaseq != "data-specific" {
        return Err(Error::Estimator(format!(
            "unsupported SPRING lambda sequence {:?}",
            params.lambdaseq
        )));
    }
    let r = latent_correlation(t)?;
    let path = lambda_path(r.values.view(), params.nlambda, params.lambda_min_ratio)?;
    let stars = StarsParams {
        rep_num: params.rep_num,
        seed,
        ..StarsParams::default()
    };
    let sel = stars_select(&LatentNeighborhoodFitter { table: t }, &path, &stars)?;
    let net = BinaryNetwork::new(
        sel.adjacency.clone(),
        t.taxa().to_vec(),
        Provenance {
            method: Method::Spring.as_str().into(),
            lambda: Some(sel.lambda),
            detail: Some("stars".into()),
        },
    )?;
    Ok(MethodResult::sparse(
        Method::Spring,
        to_record(params),
        net,
        stars_info(&sel, &path.values),
    ))
}

/// Composition → CLR → correlation → λ-path → EBIC-selected graphical lasso.
pub fn gcoda_fit(t: &CountTable, params: &GcodaParams) -> Result<MethodResult> {
    if params.nlambda == 0 {
        return Err(Error::Estimator("nlambda must be positive".into()));
    }
    let comp = composition_for(t, params.counts, params.pseudo)?;
    let clr = clr_transform(&comp)?;
    let r = standardized_gram(clr.values.view());
    let path = lambda_path(r.view(), params.nlambda, params.lambda_min_ratio)?;
    let sel = ebic_select(r.view(), t.n_samples(), &path, params.ebic_gamma)?;
    let net = BinaryNetwork::new(
        sel.adjacency.clone(),
        t.taxa().to_vec(),
        Provenance {
            method: Method::Gcoda.as_str().into(),
            lambda: Some(sel.lambda),
            detail: Some("ebic".into()),
        },
    )?;
    Ok(MethodResult::sparse(
        Method::Gcoda,
        to_record(params),
        net,
        SelectionInfo {
            lambda: Some(sel.lambda),
            path: path.values.clone(),
            instability: Vec::new(),
            ebic: sel.scores.clone(),
            flagged: false,
            note: None,
        },
    ))
}
