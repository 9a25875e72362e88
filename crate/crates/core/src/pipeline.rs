//! End-to-end editing: plan with the refinement chain, then execute.

use std::time::Instant;

use image::RgbImage;

use crate::exec::{dilate_mask, execute_plan, EditResult, ExecError, Intermediate};
use crate::gateway::Gateway;
use crate::reasoning::{ChainConfig, EditPlan, PromptSet, Reasoner, ReasoningError, Trace, TraceEvent};
use crate::ssr::build_ssr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Reasoning(#[from] ReasoningError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Anything that turns `(image, query)` into an edited image.
pub trait EditPipeline: Send + Sync {
    fn name(&self) -> &str;
    fn edit(&self, image: &RgbImage, query: &str) -> Result<RgbImage, PipelineError>;
}

/// Returns the input unchanged. Baseline for preservation metrics.
pub struct IdentityPipeline;

impl EditPipeline for IdentityPipeline {
    fn name(&self) -> &str {
        "identity"
    }

    fn edit(&self, image: &RgbImage, _: &str) -> Result<RgbImage, PipelineError> {
        Ok(image.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditOutcome {
    pub plan: EditPlan,
    pub result: EditResult,
}

#[derive(Debug, Clone)]
pub struct ReasoningPipeline {
    pub gateway: Gateway,
    pub prompts: PromptSet,
    pub chain: ChainConfig,
    pub dilation: u32,
    /// Rebuild the scene from the edited image before each later subtask.
    /// When off, every subtask is planned against the original scene and
    /// the steps are executed afterwards.
    pub rebuild_between_steps: bool,
}

impl ReasoningPipeline {
    pub fn new(gateway: Gateway) -> Self {
        Self {
            gateway,
            prompts: PromptSet::builtin(),
            chain: ChainConfig::default(),
            dilation: 0,
            rebuild_between_steps: true,
        }
    }

    fn reasoner(&self) -> Result<Reasoner<'_>, ReasoningError> {
        Reasoner::new(&self.gateway, &self.prompts, self.chain.clone())
    }

    /// Plans without editing.
    pub fn plan(&self, image: &RgbImage, query: &str) -> Result<EditPlan, ReasoningError> {
        self.reasoner()?.run_chain(image, query)
    }

    pub fn run(&self, image: &RgbImage, query: &str) -> Result<EditOutcome, PipelineError> {
        if !self.rebuild_between_steps {
            let mut plan = self.plan(image, query)?;
            let result = execute_plan(image, &plan.steps, &self.gateway, self.dilation)?;
            for im in &result.intermediates {
                record_inpaint(&mut plan.trace, im, &plan.steps[im.step - 1].inpaint_prompt, self.dilation);
            }
            return Ok(EditOutcome { plan, result });
        }

        let r = self.reasoner()?;
        let tau = self.chain.tau;
        let mut trace = Trace::new();
        let mut scene = build_ssr(image, &self.gateway, tau).map_err(ReasoningError::from)?;
        trace.push(TraceEvent::SsrBuilt {
            objects: scene.len(),
            revision: scene.revision(),
        });
        let task = r.decompose_query(query, &mut trace)?;
        let mut current = image.clone();
        let mut steps = Vec::new();
        let mut intermediates = Vec::new();
        let mut timings = Vec::new();
        for (i, subtask) in task.subtasks.iter().enumerate() {
            if i > 0 {
                scene = build_ssr(&current, &self.gateway, tau).map_err(ReasoningError::from)?;
                trace.push(TraceEvent::SsrBuilt {
                    objects: scene.len(),
                    revision: scene.revision(),
                });
            }
            let (next, step) = r.plan_subtask(scene, &current, i + 1, subtask, &mut trace)?;
            scene = next;
            let started = Instant::now();
            let mask = dilate_mask(&step.mask, self.dilation);
            let output = self
                .gateway
                .inpaint(&current, &mask, &step.inpaint_prompt)
                .map_err(|source| ExecError::Step {
                    step: i + 1,
                    source,
                    completed: intermediates.clone(),
                })?;
            timings.push(started.elapsed().as_secs_f64());
            let im = Intermediate {
                step: i + 1,
                input: current,
                mask,
                output: output.clone(),
            };
            record_inpaint(&mut trace, &im, &step.inpaint_prompt, self.dilation);
            intermediates.push(im);
            steps.push(step);
            current = output;
        }
        Ok(EditOutcome {
            plan: EditPlan { task, steps, trace },
            result: EditResult {
                final_image: current,
                intermediates,
                timings,
            },
        })
    }
}

fn record_inpaint(trace: &mut Trace, im: &Intermediate, prompt: &str, dilation: u32) {
    trace.push(TraceEvent::Inpaint {
        step: im.step,
        prompt: prompt.to_string(),
        mask_area: im.mask.area(),
        dilation,
    });
}

impl EditPipeline for ReasoningPipeline {
    fn name(&self) -> &str {
        "reasoning"
    }

    fn edit(&self, image: &RgbImage, query: &str) -> Result<RgbImage, PipelineError> {
        Ok(self.run(image, query)?.result.final_image)
    }
}
