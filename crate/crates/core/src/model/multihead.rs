use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{Combine, RelationMode, TrainConfig};
use crate::data::{DomainDataset, DomainId, Example, Split, TaskKind};
use crate::error::{Error, Result};
use crate::numerics::{loss_ce, loss_mse, softmax, stream, Activation, Mlp, Parameters, Purpose, Tape};
use crate::relations::{build_matrix, check_beta, normalize_or_uniform, FixedRelation, LearnedPass, RelationMatrix, RelationNet};

/// Shared extractor `e`, one head per training domain, and the relation
/// network that produces the learned part of the domain relations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHeadModel {
    task: TaskKind,
    extractor: Mlp,
    heads: Vec<Mlp>,
    head_domains: Vec<DomainId>,
    relation_net: RelationNet,
    fixed: FixedRelation,
    beta: f64,
    combine: Combine,
    mode: RelationMode,
}

/// Gradients laid out like the trainable parameters of [`MultiHeadModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub extractor: Mlp,
    pub heads: Vec<Mlp>,
    pub relation_net: RelationNet,
}

/// Batch means of the two loss terms and their `lambda`-weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub pred: f64,
    pub rel: f64,
    pub total: f64,
}

impl Parameters for MultiHeadModel {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.extractor.visit(f);
        self.heads.visit(f);
        self.relation_net.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.extractor.visit_mut(f);
        self.heads.visit_mut(f);
        self.relation_net.visit_mut(f);
    }
}

impl Parameters for ModelGrads {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        self.extractor.visit(f);
        self.heads.visit(f);
        self.relation_net.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.extractor.visit_mut(f);
        self.heads.visit_mut(f);
        self.relation_net.visit_mut(f);
    }
}

impl MultiHeadModel {
    pub fn new(
        task: TaskKind,
        extractor: Mlp,
        heads: Vec<Mlp>,
        head_domains: Vec<DomainId>,
        relation_net: RelationNet,
        fixed: FixedRelation,
        beta: f64,
    ) -> Result<Self> {
        check_beta(beta)?;
        if heads.is_empty() || heads.len() != head_domains.len() {
            return Err(Error::InvalidParams(format!(
                "{} heads for {} training domains",
                heads.len(),
                head_domains.len()
            )));
        }
        for (i, d) in head_domains.iter().enumerate() {
            if head_domains[..i].contains(d) {
                return Err(Error::InvalidParams(format!("domain {d} has two heads")));
            }
        }
        for h in &heads {
            if h.in_dim() != extractor.out_dim() {
                return Err(Error::DimensionMismatch {
                    context: "head input",
                    expected: extractor.out_dim(),
                    actual: h.in_dim(),
                });
            }
            if h.out_dim() != task.output_dim() {
                return Err(Error::DimensionMismatch {
                    context: "head output",
                    expected: task.output_dim(),
                    actual: h.out_dim(),
                });
            }
        }
        Ok(Self {
            task,
            extractor,
            heads,
            head_domains,
            relation_net,
            fixed,
            beta,
            combine: Combine::Logits,
            mode: RelationMode::Fused,
        })
    }

    /// Fresh model with one head per training domain of `ds`.
    pub fn init(ds: &DomainDataset, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let domains = ds.domains(Split::Train);
        if domains.len() < 2 {
            return Err(Error::InvalidDataset(format!("need >= 2 training domains, found {}", domains.len())));
        }
        let width = cfg.hidden_width;
        let out = ds.task().output_dim();
        let extractor = Mlp::init(
            &[ds.feature_dim(), width],
            &[Activation::Relu],
            &mut stream(cfg.seed, Purpose::Init, 0),
        )?;
        let heads = (0..domains.len())
            .map(|k| Mlp::init(&[width, out], &[Activation::Identity], &mut stream(cfg.seed, Purpose::Init, k as u64 + 1)))
            .collect::<Result<Vec<_>>>()?;
        let relation_net = RelationNet::init(
            ds.meta_dim(),
            cfg.relation_width,
            cfg.relation_heads,
            &mut stream(cfg.seed, Purpose::Init, 1 << 20),
        )?;
        let fixed = cfg.fixed.resolve(ds)?;
        let mut model = Self::new(ds.task(), extractor, heads, domains, relation_net, fixed, cfg.beta)?;
        model.combine = cfg.combine;
        model.mode = cfg.relations;
        Ok(model)
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn extractor(&self) -> &Mlp {
        &self.extractor
    }

    pub fn heads(&self) -> &[Mlp] {
        &self.heads
    }

    pub fn heads_mut(&mut self) -> &mut [Mlp] {
        &mut self.heads
    }

    pub fn head_domains(&self) -> &[DomainId] {
        &self.head_domains
    }

    pub fn relation_net(&self) -> &RelationNet {
        &self.relation_net
    }

    pub fn relation_net_mut(&mut self) -> &mut RelationNet {
        &mut self.relation_net
    }

    pub fn fixed_relation(&self) -> &FixedRelation {
        &self.fixed
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        check_beta(beta)?;
        self.beta = beta;
        Ok(())
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn set_combine(&mut self, combine: Combine) {
        self.combine = combine;
    }

    pub fn relation_mode(&self) -> RelationMode {
        self.mode
    }

    pub fn set_relation_mode(&mut self, mode: RelationMode) {
        self.mode = mode;
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            extractor: self.extractor.zeros_like(),
            heads: self.heads.iter().map(Mlp::zeros_like).collect(),
            relation_net: self.relation_net.zeros_like(),
        }
    }

    pub fn head_index(&self, d: DomainId) -> Result<usize> {
        self.head_domains.iter().position(|&h| h == d).ok_or(Error::UnknownDomain(d))
    }

    /// `h^(d)(e(x))`.
    pub fn predict_head(&self, d: DomainId, x: &[f64]) -> Result<Vec<f64>> {
        let k = self.head_index(d)?;
        self.heads[k].predict(&self.extractor.predict(x)?)
    }

    /// Outputs of every head, in head order.
    pub fn head_outputs(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let z = self.extractor.predict(x)?;
        self.heads.iter().map(|h| h.predict(&z)).collect()
    }

    /// Fused relations over `ids`, ignoring the uniform ablation mode.
    pub fn relations(&self, meta: &BTreeMap<DomainId, Vec<f64>>, ids: &[DomainId]) -> Result<RelationMatrix> {
        build_matrix(meta, ids, &self.fixed, &self.relation_net, self.beta)
    }

    /// Relations among the training domains, in head order.
    pub fn training_relations(&self, meta: &BTreeMap<DomainId, Vec<f64>>) -> Result<RelationMatrix> {
        self.relations(meta, &self.head_domains)
    }

    /// `a_{d,t}` for every head `d`, the weights used to predict domain `t`.
    pub fn relation_row(&self, meta: &BTreeMap<DomainId, Vec<f64>>, target: DomainId) -> Result<Vec<f64>> {
        if self.mode == RelationMode::Uniform {
            return Ok(vec![1.0; self.heads.len()]);
        }
        let mut ids = self.head_domains.clone();
        if !ids.contains(&target) {
            ids.push(target);
        }
        self.relations(meta, &ids)?.row_for(target, &self.head_domains)
    }

    /// Relation-weighted combination of the head outputs. Classification
    /// outputs are logits or probabilities depending on [`Combine`].
    pub fn infer(&self, row: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.heads.len() {
            return Err(Error::DimensionMismatch {
                context: "relation row",
                expected: self.heads.len(),
                actual: row.len(),
            });
        }
        let weights = normalize_or_uniform(row)?;
        let outs = self.head_outputs(x)?;
        let mut combined = vec![0.0; self.task.output_dim()];
        for (w, o) in weights.iter().zip(&outs) {
            let c = self.contribution(o);
            for (acc, v) in combined.iter_mut().zip(&c) {
                *acc += w * v;
            }
        }
        Ok(combined)
    }

    /// Plain average of the head outputs.
    pub fn infer_uniform(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.infer(&vec![1.0; self.heads.len()], x)
    }

    fn uses_probabilities(&self) -> bool {
        self.combine == Combine::Probabilities && matches!(self.task, TaskKind::Classification { .. })
    }

    fn contribution(&self, out: &[f64]) -> Vec<f64> {
        if self.uses_probabilities() {
            softmax(out)
        } else {
            out.to_vec()
        }
    }

    /// Loss of a single output and its gradient.
    fn pointwise(&self, out: &[f64], ex: &Example) -> Result<(f64, Vec<f64>)> {
        match self.task {
            TaskKind::Classification { .. } => loss_ce(out, ex.label()),
            TaskKind::Regression => loss_mse(out, &[ex.y]),
        }
    }

    /// Loss of a combined head contribution and its gradient.
    fn combined_loss(&self, combined: &[f64], ex: &Example) -> Result<(f64, Vec<f64>)> {
        if self.uses_probabilities() {
            let y = ex.label();
            if y >= combined.len() {
                return Err(Error::LabelOutOfRange {
                    label: y,
                    classes: combined.len(),
                });
            }
            let q = combined[y].max(f64::MIN_POSITIVE);
            let mut g = vec![0.0; combined.len()];
            g[y] = -1.0 / q;
            Ok((-q.ln(), g))
        } else {
            self.pointwise(combined, ex)
        }
    }

    /// Mean per-example loss, each example scored by its own head.
    pub fn loss_pred(&self, batch: &[&Example]) -> Result<f64> {
        Ok(self.batch_terms(batch, None, 0.0, None)?.pred)
    }

    /// Mean consistency loss: each example is scored by the relation-weighted
    /// average of the other heads.
    pub fn loss_rel(&self, batch: &[&Example], relations: &RelationMatrix) -> Result<f64> {
        let fused = self.head_order(relations)?;
        Ok(self.batch_terms(batch, Some(&fused), 0.0, None)?.rel)
    }

    pub fn total_loss(&self, batch: &[&Example], relations: &RelationMatrix, lambda: f64) -> Result<f64> {
        let fused = self.head_order(relations)?;
        Ok(self.batch_terms(batch, Some(&fused), lambda, None)?.total)
    }

    fn head_order(&self, relations: &RelationMatrix) -> Result<Vec<Vec<f64>>> {
        self.head_domains
            .iter()
            .map(|&i| self.head_domains.iter().map(|&j| relations.get(i, j)).collect())
            .collect()
    }

    /// Training objective with the relations rebuilt from `meta`, and its
    /// gradient with respect to every trainable parameter, including the
    /// relation network through the fused relations.
    pub fn objective(
        &self,
        batch: &[&Example],
        meta: &BTreeMap<DomainId, Vec<f64>>,
        lambda: f64,
    ) -> Result<(LossParts, ModelGrads)> {
        let n = self.heads.len();
        let mut grads = self.zero_grads();
        let mut d_fused = vec![vec![0.0; n]; n];
        match self.mode {
            RelationMode::Uniform => {
                let ones = vec![vec![1.0; n]; n];
                let parts = self.batch_terms(batch, Some(&ones), lambda, Some((&mut grads, &mut d_fused)))?;
                Ok((parts, grads))
            }
            RelationMode::Fused => {
                let (pass, pre) = self.relation_pass(meta)?;
                let fused: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..n).map(|j| if i == j { 1.0 } else { pre[i][j].max(0.0) }).collect())
                    .collect();
                let parts = self.batch_terms(batch, Some(&fused), lambda, Some((&mut grads, &mut d_fused)))?;
                if self.beta < 1.0 {
                    let d_learned: Vec<Vec<f64>> = (0..n)
                        .map(|i| {
                            (0..n)
                                .map(|j| {
                                    if i != j && pre[i][j] > 0.0 {
                                        (1.0 - self.beta) * d_fused[i][j]
                                    } else {
                                        0.0
                                    }
                                })
                                .collect()
                        })
                        .collect();
                    pass.backward(&self.relation_net, &d_learned, &mut grads.relation_net)?;
                }
                Ok((parts, grads))
            }
        }
    }

    /// Learned pass over the training domains and the pre-clamp fused matrix.
    fn relation_pass(&self, meta: &BTreeMap<DomainId, Vec<f64>>) -> Result<(LearnedPass, Vec<Vec<f64>>)> {
        let metas = self
            .head_domains
            .iter()
            .map(|id| meta.get(id).map(Vec::as_slice).ok_or(Error::MissingMeta(*id)))
            .collect::<Result<Vec<&[f64]>>>()?;
        let pass = self.relation_net.forward_set(&metas)?;
        let n = metas.len();
        let mut pre = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let g = self.fixed.value(self.head_domains[i], metas[i], self.head_domains[j], metas[j])?;
                pre[i][j] = self.beta * g + (1.0 - self.beta) * pass.matrix()[i][j];
            }
        }
        Ok((pass, pre))
    }

    /// Shared forward (and optional backward) over a batch. `fused` is in
    /// head order; without it only the prediction term is evaluated. With
    /// `grads`, accumulates parameter gradients and `d total / d fused[d][j]`.
    fn batch_terms(
        &self,
        batch: &[&Example],
        fused: Option<&[Vec<f64>]>,
        lambda: f64,
        mut grads: Option<(&mut ModelGrads, &mut Vec<Vec<f64>>)>,
    ) -> Result<LossParts> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = self.heads.len();
        if fused.is_some() && n < 2 {
            return Err(Error::InvalidParams("consistency loss needs >= 2 heads".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let (mut sum_pred, mut sum_rel) = (0.0, 0.0);
        for ex in batch {
            let h = self.head_index(ex.domain)?;
            let (z, e_tape) = self.extractor.forward(&ex.x)?;
            let mut outs: Vec<Vec<f64>> = Vec::with_capacity(n);
            let mut tapes: Vec<Option<Tape>> = Vec::with_capacity(n);
            for (k, head) in self.heads.iter().enumerate() {
                if fused.is_some() || k == h {
                    let (o, t) = head.forward(&z)?;
                    outs.push(o);
                    tapes.push(Some(t));
                } else {
                    outs.push(Vec::new());
                    tapes.push(None);
                }
            }
            let (lp, gp) = self.pointwise(&outs[h], ex)?;
            sum_pred += lp;
            let mut d_out: Vec<Vec<f64>> = outs.iter().map(|o| vec![0.0; o.len()]).collect();
            for (d, g) in d_out[h].iter_mut().zip(&gp) {
                *d += scale * g;
            }

            if let Some(fused) = fused {
                let row = &fused[h];
                let s: f64 = (0..n).filter(|&j| j != h).map(|j| row[j]).sum();
                let weights: Vec<f64> = (0..n)
                    .map(|j| match (j == h, s > 0.0) {
                        (true, _) => 0.0,
                        (false, true) => row[j] / s,
                        (false, false) => 1.0 / (n - 1) as f64,
                    })
                    .collect();
                let contrib: Vec<Vec<f64>> = outs.iter().map(|o| self.contribution(o)).collect();
                let mut combined = vec![0.0; self.task.output_dim()];
                for j in (0..n).filter(|&j| j != h) {
                    for (acc, v) in combined.iter_mut().zip(&contrib[j]) {
                        *acc += weights[j] * v;
                    }
                }
                let (lr, gr) = self.combined_loss(&combined, ex)?;
                sum_rel += lr;

                if let Some((_, d_fused)) = grads.as_mut() {
                    let rel_scale = lambda * scale;
                    for j in (0..n).filter(|&j| j != h) {
                        let dc: Vec<f64> = gr.iter().map(|g| weights[j] * g).collect();
                        let d_o = if self.uses_probabilities() {
                            let p = &contrib[j];
                            let inner: f64 = p.iter().zip(&dc).map(|(a, b)| a * b).sum();
                            p.iter().zip(&dc).map(|(pk, dk)| pk * (dk - inner)).collect()
                        } else {
                            dc
                        };
                        for (acc, v) in d_out[j].iter_mut().zip(&d_o) {
                            *acc += rel_scale * v;
                        }
                    }
                    if s > 0.0 {
                        let dw: Vec<f64> =
                            contrib.iter().map(|c| c.iter().zip(&gr).map(|(a, b)| a * b).sum()).collect();
                        let mean_dw: f64 = (0..n).map(|k| weights[k] * dw[k]).sum();
                        for j in (0..n).filter(|&j| j != h) {
                            d_fused[h][j] += rel_scale * (dw[j] - mean_dw) / s;
                        }
                    }
                }
            }

            if let Some((g, _)) = grads.as_mut() {
                let mut d_z = vec![0.0; z.len()];
                for (k, tape) in tapes.iter().enumerate() {
                    let Some(tape) = tape else { continue };
                    if d_out[k].iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let dz = self.heads[k].backward_into(tape, &d_out[k], &mut g.heads[k])?;
                    for (acc, v) in d_z.iter_mut().zip(&dz) {
                        *acc += v;
                    }
                }
                self.extractor.backward_into(&e_tape, &d_z, &mut g.extractor)?;
            }
        }
        let pred = sum_pred * scale;
        let rel = sum_rel * scale;
        Ok(LossParts {
            pred,
            rel,
            total: pred + lambda * rel,
        })
    }
}
