use super::{Algorithm, IterationReport, Simulation};
use crate::compress::CompressedMessage;
use crate::error::Result;
use crate::ledger::Direction;
use crate::optim::variance_instability;
use crate::problems::{sample_batch, Problem};
use crate::rng::{Lane, Purpose, RandomStream, SERVER};
use crate::vector::ModelVector;

impl<P: Problem + ?Sized> Simulation<'_, P> {
    fn stream(&self, worker: u32, t: u64, purpose: Purpose) -> RandomStream {
        RandomStream::new(self.config.seed, Lane::new(worker, t), purpose)
    }

    /// Fresh local gradients at each worker's model replica.
    fn local_gradients(&self, t: u64) -> Result<Vec<ModelVector>> {
        let mut grads = Vec::with_capacity(self.workers.len());
        for (i, w) in self.workers.iter().enumerate() {
            let mut rng = self.stream(i as u32, t, Purpose::Batch);
            let batch = sample_batch(self.problem.worker_range(i), self.config.tau, &mut rng)?;
            let g = self.problem.local_gradient(i, w.x(), &batch)?;
            if !g.is_finite() {
                return Err(self.diverged(t, format!("local gradient of worker {i}")));
            }
            grads.push(g);
        }
        Ok(grads)
    }

    fn mean(&self, vectors: &[ModelVector]) -> ModelVector {
        let mut out = ModelVector::zeros(self.problem.dim());
        for v in vectors {
            out.add_scaled_unchecked(1.0, v);
        }
        let inv = 1.0 / vectors.len() as f64;
        for o in out.as_mut_slice() {
            *o *= inv;
        }
        out
    }

    fn mean_of_messages(&self, msgs: &[CompressedMessage]) -> ModelVector {
        let mut out = ModelVector::zeros(self.problem.dim());
        for m in msgs {
            m.add_into(&mut out);
        }
        let inv = 1.0 / msgs.len() as f64;
        for o in out.as_mut_slice() {
            *o *= inv;
        }
        out
    }

    /// CD-Adam and two-way EF21: Markov-compressed upload and broadcast,
    /// model update on the workers.
    pub(super) fn markov_two_way(&mut self, t: u64) -> Result<IterationReport> {
        let spec = self.config.compressor;
        let grads = self.local_gradients(t)?;
        let mut report = IterationReport {
            iteration: t,
            fresh_grad_inf: grads.iter().map(|g| g.norm_inf()).fold(0.0, f64::max),
            ..Default::default()
        };

        // Workers: c⁽ⁱ⁾ = C(g⁽ⁱ⁾ − ĝ⁽ⁱ⁾), ĝ⁽ⁱ⁾ += c⁽ⁱ⁾.
        let mut uplink = Vec::with_capacity(grads.len());
        for (i, g) in grads.iter().enumerate() {
            let mut rng = self.stream(i as u32, t, Purpose::Uplink);
            let before = g.dist_sq(self.workers[i].markov_up.reference())?;
            let stepped = self.workers[i].markov_up.step(&spec, g, &mut rng);
            let msg = stepped.map_err(|e| self.contextualize(t, e))?;
            let after = self.workers[i].markov_up.reference().dist_sq(g)?;
            report.push_pi(after, before);
            self.record(t, Direction::Up, i as u32, &msg);
            uplink.push(msg);
        }

        // Server: ĝ += (1/n) Σ c⁽ⁱ⁾, then c = C(ĝ − g̃), g̃ += c.
        let increment = self.mean_of_messages(&uplink);
        self.server.g_hat.add_scaled_unchecked(1.0, &increment);
        if !self.server.g_hat.is_finite() {
            return Err(self.diverged(t, "server aggregate"));
        }
        let mut rng = self.stream(SERVER, t, Purpose::Downlink);
        let before = self.server.g_hat.dist_sq(self.server.markov_down.reference())?;
        let g_hat = self.server.g_hat.clone();
        let stepped = self.server.markov_down.step(&spec, &g_hat, &mut rng);
        let down = stepped.map_err(|e| self.contextualize(t, e))?;
        let after = self.server.markov_down.reference().dist_sq(&g_hat)?;
        report.push_pi(after, before);
        self.record(t, Direction::Down, SERVER, &down);

        // Workers: g̃ += c, then the optimizer step with g̃.
        let params = self.config.params;
        let alpha = params.step.at(t);
        let momentum = self.config.sgd_momentum;
        let is_adam = self.config.algorithm == Algorithm::Cdadam;
        let mut update = Ok(());
        for w in &mut self.workers {
            w.markov_down.apply(&down)?;
            let g_tilde = w.markov_down.reference();
            if is_adam {
                update = update.and(w.opt.step(g_tilde, &params, t));
            } else {
                // m ← βm + g̃, x ← x − αm; β = 0 is plain SGD.
                let m = w.opt.m.as_mut_slice();
                let x = w.opt.x.as_mut_slice();
                for ((mj, xj), gj) in m.iter_mut().zip(x.iter_mut()).zip(g_tilde.iter()) {
                    *mj = momentum * *mj + gj;
                    *xj -= alpha * *mj;
                }
            }
        }
        update.map_err(|e| self.contextualize(t, e))?;
        if !self.workers[0].x().is_finite() {
            return Err(self.diverged(t, "model x"));
        }

        let applied = self.server.markov_down.reference();
        report.applied_grad_inf = applied.norm_inf();
        if is_adam {
            let fresh = self.mean(&grads);
            let (q, inner) = variance_instability(&fresh, applied, params.beta2)?;
            report.variance_quadratic = Some(q);
            report.variance_inner = Some(inner);
        }
        Ok(report)
    }

    /// Full-precision upload and broadcast of the averaged gradient.
    pub(super) fn uncompressed(&mut self, t: u64) -> Result<IterationReport> {
        let grads = self.local_gradients(t)?;
        for (i, g) in grads.iter().enumerate() {
            self.record(t, Direction::Up, i as u32, &CompressedMessage::dense(g));
        }
        let avg = self.mean(&grads);
        self.record(t, Direction::Down, SERVER, &CompressedMessage::dense(&avg));
        self.apply_amsgrad(t, &avg)?;
        Ok(IterationReport {
            iteration: t,
            variance_quadratic: Some(0.0),
            variance_inner: Some(0.0),
            fresh_grad_inf: grads.iter().map(|g| g.norm_inf()).fold(0.0, f64::max),
            applied_grad_inf: avg.norm_inf(),
            ..Default::default()
        })
    }

    /// Naive compression and error feedback: compressed upload, full-precision broadcast.
    pub(super) fn one_way(&mut self, t: u64) -> Result<IterationReport> {
        let spec = self.config.compressor;
        let feedback = self.config.algorithm == Algorithm::EfAmsgrad;
        let grads = self.local_gradients(t)?;
        let mut report = IterationReport {
            iteration: t,
            fresh_grad_inf: grads.iter().map(|g| g.norm_inf()).fold(0.0, f64::max),
            ..Default::default()
        };

        let mut uplink = Vec::with_capacity(grads.len());
        for (i, g) in grads.iter().enumerate() {
            let mut rng = self.stream(i as u32, t, Purpose::Uplink);
            let input = if feedback {
                g.add(&self.workers[i].ef_residual)
                    .map_err(|e| self.contextualize(t, e))?
            } else {
                g.clone()
            };
            let msg = spec.compress(&input, &mut rng);
            report.push_pi(msg.error_sq(&input), input.norm_sq());
            if feedback {
                // δ ← g + δ − C(g + δ)
                let mut residual = input;
                for (r, c) in residual.as_mut_slice().iter_mut().zip(msg.decode().iter()) {
                    *r -= c;
                }
                self.workers[i].ef_residual = residual;
            }
            self.record(t, Direction::Up, i as u32, &msg);
            uplink.push(msg);
        }

        let avg = self.mean_of_messages(&uplink);
        self.record(t, Direction::Down, SERVER, &CompressedMessage::dense(&avg));
        self.apply_amsgrad(t, &avg)?;

        let fresh = self.mean(&grads);
        let (q, inner) = variance_instability(&fresh, &avg, self.config.params.beta2)?;
        report.variance_quadratic = Some(q);
        report.variance_inner = Some(inner);
        report.applied_grad_inf = avg.norm_inf();
        Ok(report)
    }

    /// 1-bit Adam after warm-up: local momentum compressed with error
    /// feedback, server re-compresses the average with its own residual,
    /// workers step with the frozen variance.
    pub(super) fn onebit_compressed(&mut self, t: u64) -> Result<IterationReport> {
        let spec = self.config.compressor;
        let beta1 = self.config.params.beta1;
        let grads = self.local_gradients(t)?;
        let mut report = IterationReport {
            iteration: t,
            fresh_grad_inf: grads.iter().map(|g| g.norm_inf()).fold(0.0, f64::max),
            ..Default::default()
        };

        let mut uplink = Vec::with_capacity(grads.len());
        for (i, g) in grads.iter().enumerate() {
            let mut rng = self.stream(i as u32, t, Purpose::Uplink);
            let w = &self.workers[i];
            // m⁽ⁱ⁾ = β₁m + (1 − β₁)g⁽ⁱ⁾ from the shared momentum, plus the residual.
            let input: Vec<f64> = w
                .opt
                .m
                .iter()
                .zip(g.iter())
                .zip(w.ef_residual.iter())
                .map(|((m, g), r)| beta1 * m + (1.0 - beta1) * g + r)
                .collect();
            let input = ModelVector::from_raw(input);
            if !input.is_finite() {
                return Err(self.diverged(t, format!("momentum of worker {i}")));
            }
            let msg = spec.compress(&input, &mut rng);
            report.push_pi(msg.error_sq(&input), input.norm_sq());
            let mut residual = input;
            for (r, c) in residual.as_mut_slice().iter_mut().zip(msg.decode().iter()) {
                *r -= c;
            }
            self.workers[i].ef_residual = residual;
            self.record(t, Direction::Up, i as u32, &msg);
            uplink.push(msg);
        }

        let avg = self.mean_of_messages(&uplink);
        let server_input = avg
            .add(&self.server.ef_residual)
            .map_err(|e| self.contextualize(t, e))?;
        let mut rng = self.stream(SERVER, t, Purpose::Downlink);
        let down = spec.compress(&server_input, &mut rng);
        report.push_pi(down.error_sq(&server_input), server_input.norm_sq());
        let mut residual = server_input;
        for (r, c) in residual.as_mut_slice().iter_mut().zip(down.decode().iter()) {
            *r -= c;
        }
        self.server.ef_residual = residual;
        self.record(t, Direction::Down, SERVER, &down);

        let alpha = self.config.params.step.at(t);
        let momentum = down.decode();
        for w in &mut self.workers {
            let v = w.frozen_v.as_ref().expect("variance frozen after warm-up");
            let x = w.opt.x.as_mut_slice();
            for ((xj, mj), vj) in x.iter_mut().zip(momentum.iter()).zip(v.iter()) {
                *xj -= alpha * mj / vj.sqrt();
            }
            w.opt.m = momentum.clone();
        }
        if !self.workers[0].x().is_finite() {
            return Err(self.diverged(t, "model x"));
        }
        report.applied_grad_inf = momentum.norm_inf();
        Ok(report)
    }

    fn apply_amsgrad(&mut self, t: u64, g: &ModelVector) -> Result<()> {
        let params = self.config.params;
        for i in 0..self.workers.len() {
            if let Err(e) = self.workers[i].opt.step(g, &params, t) {
                return Err(self.contextualize(t, e));
            }
        }
        Ok(())
    }
}
