//! Browser bindings for the demo page in `www/`: fit the embedding on a
//! Swiss roll, compare it with PCA, and place new points with the layer and
//! with the graph-linked query.

use ime_core::eval::evaluate_in_database;
use ime_core::{
    apply_layer, embed_query_via_graph, fit_layer, generate_holed_manifold, ime_fit_traced, pca_apply, pca_fit,
    GraphQueryContext, ImeConfig, ImeError, ImeLayer, Matrix, SyntheticManifold,
};
use wasm_bindgen::prelude::*;

fn js(e: ImeError) -> JsError {
    JsError::new(&e.to_string())
}

/// Training points each graph-linked query connects to.
const QUERY_K: usize = 8;

#[wasm_bindgen]
pub struct Demo {
    data: SyntheticManifold,
    ime: Matrix,
    layer_db: Matrix,
    pca: Matrix,
    layer: ImeLayer,
    ctx: GraphQueryContext,
    ime_map: f64,
    pca_map: f64,
}

#[wasm_bindgen]
impl Demo {
    /// Generates the roll (`hole_fraction` 0 gives a plain roll) and fits
    /// everything with the given parameters.
    #[wasm_bindgen(constructor)]
    pub fn new(
        count: usize,
        hole_fraction: f64,
        seed: u64,
        iterations: usize,
        k: usize,
        omega: f64,
        second_order: bool,
    ) -> Result<Demo, JsError> {
        let data = generate_holed_manifold(count, hole_fraction, seed).map_err(js)?;
        let mut config = ImeConfig::uniform(iterations, k, omega, 2);
        config.use_second_order = second_order;
        config.validate(Some(count)).map_err(js)?;

        let run = ime_fit_traced(&data.set, &config).map_err(js)?;
        let layer = fit_layer(&data.set, &run.embedding, 1.0).map_err(js)?;
        let ctx = GraphQueryContext::from_run(&data.set, &run, QUERY_K).map_err(js)?;
        let pca = pca_apply(&pca_fit(&data.set, 2).map_err(js)?, &data.set).map_err(js)?;
        let layer_db = apply_layer(&layer, &data.set).map_err(js)?;

        let ids = data.set.id_list();
        let ime = run.embedding.coords;
        let ime_map = evaluate_in_database(&ime, &ids, &data.truth).map_err(js)?.map;
        let pca_map = evaluate_in_database(&pca, &ids, &data.truth).map_err(js)?.map;
        Ok(Demo {
            data,
            ime,
            layer_db,
            pca,
            layer,
            ctx,
            ime_map,
            pca_map,
        })
    }

    pub fn len(&self) -> usize {
        self.data.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.set.is_empty()
    }

    /// Row-major `x, y, z` triples.
    pub fn points(&self) -> Vec<f64> {
        self.data.set.vectors().as_slice().to_vec()
    }

    pub fn bands(&self) -> Vec<u32> {
        self.data.labels.iter().map(|&b| b as u32).collect()
    }

    /// Row-major 2-D coordinates; `which` is "ime", "layer" or "pca".
    pub fn coords(&self, which: &str) -> Result<Vec<f64>, JsError> {
        let m = match which {
            "ime" => &self.ime,
            "layer" => &self.layer_db,
            "pca" => &self.pca,
            other => return Err(JsError::new(&format!("unknown view {other:?}"))),
        };
        // A truncated spectrum gives fewer than two columns; pad with zeros.
        Ok((0..m.rows())
            .flat_map(|i| (0..2).map(move |j| if j < m.cols() { m[(i, j)] } else { 0.0 }))
            .collect())
    }

    pub fn ime_map(&self) -> f64 {
        self.ime_map
    }

    pub fn pca_map(&self) -> f64 {
        self.pca_map
    }

    /// Places a new point through the linear layer.
    pub fn query_layer(&self, x: f64, y: f64, z: f64) -> Result<Vec<f64>, JsError> {
        self.layer.apply_one(&[x, y, z]).map_err(js)
    }

    /// Places a new point by linking it into the training graph.
    pub fn query_graph(&self, x: f64, y: f64, z: f64) -> Result<Vec<f64>, JsError> {
        embed_query_via_graph(&self.ctx, &[x, y, z]).map_err(js)
    }
}

/// A point on the roll surface at arc-length fraction `s` and height
/// fraction `h`, both in `[0, 1]`, in the same coordinates as `points()`.
#[wasm_bindgen]
pub fn roll_point(s: f64, h: f64) -> Vec<f64> {
    use ime_core::dataset::{arc_length, arc_length_inverse, ROLL_HEIGHT, ROLL_T_MAX, ROLL_T_MIN};
    let (lo, hi) = (arc_length(ROLL_T_MIN), arc_length(ROLL_T_MAX));
    let t = arc_length_inverse(lo + s.clamp(0.0, 1.0) * (hi - lo));
    vec![
        t * t.cos() / ROLL_T_MAX,
        h.clamp(0.0, 1.0) * ROLL_HEIGHT / ROLL_T_MAX,
        t * t.sin() / ROLL_T_MAX,
    ]
}
