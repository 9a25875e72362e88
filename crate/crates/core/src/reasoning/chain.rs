use image::RgbImage;

use super::dsl::{interpret_spatial, SpatialProgram};
use super::{
    need_name, EditPlan, EditStep, InfoNeed, NeedKind, OpKind, PromptSet, ReasoningError,
    TaskPlan, Trace, TraceEvent,
};
use crate::canonical::{quantize6, Canon};
use crate::gateway::schemas::{
    AssessReply, DecomposeReply, OpDoc, Reply, ResolveReply, SpatialProgramReply,
};
use crate::gateway::{ChatRequest, Gateway, GatewayError};
use crate::ssr::{
    assign_labels, attr_to_canon, best_label, build_ssr, median_depth, merge_same_label,
    region_iou, BinaryMask, BoundingBox, ObjectId, SceneRep, DEFAULT_TAU,
};

pub const DEFAULT_CAP: usize = 5;

/// Segmentation thresholds for successive semantic refinements within a
/// subtask; the last one repeats.
pub const THRESHOLD_SCHEDULE: [f64; 3] = [0.86, 0.70, 0.50];

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Refinement rounds allowed per subtask.
    pub cap: usize,
    /// IoU threshold for label assignment.
    pub tau: f64,
    pub schedule: Vec<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            tau: DEFAULT_TAU,
            schedule: THRESHOLD_SCHEDULE.to_vec(),
        }
    }
}

/// Compact scene description shown to the chat model: per object its label,
/// depth, area, bounding box, centroid and attributes. Masks are left out.
pub fn scene_summary(scene: &SceneRep) -> String {
    let objects = scene.objects().iter().map(|o| {
        let bbox = o.mask.bbox().map_or(Canon::Null, |b| {
            Canon::Array(<[u32; 4]>::from(b).iter().map(|&v| Canon::Int(v.into())).collect())
        });
        let centroid = o.mask.centroid().map_or(Canon::Null, |(x, y)| {
            Canon::Array(vec![Canon::Fixed(x), Canon::Fixed(y)])
        });
        let attrs = o.attrs.iter().map(|(k, v)| (k.clone(), attr_to_canon(v)));
        (
            o.id.to_string(),
            Canon::object([
                ("area", Canon::Int(o.mask.area() as i64)),
                ("attrs", Canon::object(attrs)),
                ("bbox", bbox),
                ("centroid", centroid),
                ("depth", Canon::opt_fixed(o.depth)),
                ("label", o.label.clone().map_or(Canon::Null, Canon::Str)),
            ]),
        )
    });
    let attrs = scene.attrs.iter().map(|(k, v)| (k.clone(), attr_to_canon(v)));
    Canon::object([
        ("attrs", Canon::object(attrs)),
        ("image_height", Canon::Int(scene.image_height().into())),
        ("image_width", Canon::Int(scene.image_width().into())),
        ("objects", Canon::object(objects)),
    ])
    .to_pretty()
}

/// Runs the chain's LLM-backed steps against one gateway.
pub struct Reasoner<'a> {
    gw: &'a Gateway,
    prompts: &'a PromptSet,
    config: ChainConfig,
}

impl<'a> Reasoner<'a> {
    pub fn new(gw: &'a Gateway, prompts: &'a PromptSet, config: ChainConfig) -> Result<Self, ReasoningError> {
        if config.cap == 0 {
            return Err(ReasoningError::Precondition("iteration cap must be at least 1".into()));
        }
        if config.schedule.is_empty() {
            return Err(ReasoningError::Precondition("threshold schedule is empty".into()));
        }
        Ok(Self { gw, prompts, config })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        self.gw
    }

    pub fn prompts(&self) -> &PromptSet {
        self.prompts
    }

    fn ask<T: Reply>(&self, prompt: String, trace: &mut Trace) -> Result<T, ReasoningError> {
        let resp = self.gw.chat(&ChatRequest::user(T::SCHEMA, prompt))?;
        trace.push(TraceEvent::LlmCall {
            schema: T::SCHEMA.to_string(),
            attempts: resp.attempts,
            payload: resp.payload.clone(),
        });
        T::from_payload(&resp.payload).map_err(|detail| {
            GatewayError::MalformedLlmOutput {
                schema: T::SCHEMA.to_string(),
                detail,
            }
            .into()
        })
    }

    /// Splits `q` into ordered subtasks. A single-subtask reply keeps the
    /// query verbatim.
    pub fn decompose_query(&self, q: &str, trace: &mut Trace) -> Result<TaskPlan, ReasoningError> {
        if q.trim().is_empty() {
            return Err(ReasoningError::Precondition("query is empty".into()));
        }
        let prompt = self.prompts.render("decompose", &[("query", q)])?;
        let reply: DecomposeReply = self.ask(prompt, trace)?;
        let subtasks = if reply.subtasks.len() == 1 {
            vec![q.to_string()]
        } else {
            reply.subtasks
        };
        trace.push(TraceEvent::Decomposition {
            subtasks: subtasks.clone(),
        });
        Ok(TaskPlan {
            source_query: q.to_string(),
            subtasks,
        })
    }

    pub fn assess_sufficiency(
        &self,
        scene: &SceneRep,
        subtask: &str,
        round: usize,
        trace: &mut Trace,
    ) -> Result<InfoNeed, ReasoningError> {
        let summary = scene_summary(scene);
        let prompt = self
            .prompts
            .render("assess", &[("ssr", &summary), ("subtask", subtask)])?;
        let reply: AssessReply = self.ask(prompt, trace)?;
        let need = match reply.need {
            NeedKind::None => InfoNeed::none(),
            kind => InfoNeed {
                kind,
                detail: reply.detail.trim().to_string(),
            },
        };
        trace.push(TraceEvent::Assessment {
            round,
            need: need_name(need.kind).into(),
            detail: need.detail.clone(),
        });
        Ok(need)
    }

    /// Re-runs detection with a vocabulary hint taken from `need.detail` and
    /// segmentation at the `step`-th scheduled threshold. Unlabeled objects
    /// may gain a label; proposals that do not overlap an existing object
    /// (IoU below tau) are labeled, merged and appended with fresh ids.
    /// Nothing else about existing objects changes. The revision advances
    /// even when nothing was found.
    pub fn refine_semantic(
        &self,
        scene: &SceneRep,
        image: &RgbImage,
        need: &InfoNeed,
        step: usize,
        trace: &mut Trace,
    ) -> Result<SceneRep, ReasoningError> {
        if need.kind != NeedKind::Semantic {
            return Err(ReasoningError::Precondition(format!(
                "semantic refinement requested for a `{}` need",
                need_name(need.kind)
            )));
        }
        let hint: Vec<String> = need
            .detail
            .split([',', ';'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        let schedule = &self.config.schedule;
        let threshold = schedule[step.min(schedule.len() - 1)];
        let detections = self.gw.detect(image, Some(&hint))?;
        let proposals = self.gw.segment(image, Some(threshold))?;

        let mut out = scene.clone();
        let mut relabeled = Vec::new();
        for o in scene.objects().iter().filter(|o| o.label.is_none()) {
            if let Some(label) = best_label(&o.mask, &detections, self.config.tau)? {
                out.get_mut(o.id).expect("same ids").label = Some(label);
                relabeled.push(o.id);
            }
        }

        let mut fresh = Vec::new();
        'proposal: for m in proposals.into_iter().filter(|m| !m.is_empty()) {
            for o in scene.objects() {
                if region_iou(&m, &o.mask)? >= self.config.tau {
                    continue 'proposal;
                }
            }
            fresh.push(m);
        }
        let merged = merge_same_label(&assign_labels(&fresh, &detections, self.config.tau)?)?;
        let mut added = Vec::new();
        if !merged.is_empty() {
            let depth = self.gw.estimate_depth(image)?;
            for mut o in merged {
                o.id = out.next_id();
                o.depth = Some(quantize6(median_depth(&o.mask, &depth)?));
                added.push(o.id);
                out.push(o)?;
            }
        }
        out.bump_revision();
        trace.push(TraceEvent::SemanticRefinement {
            round: step,
            threshold,
            hint,
            noop: relabeled.is_empty() && added.is_empty(),
            relabeled,
            added,
            revision: out.revision(),
        });
        Ok(out)
    }

    /// Asks for a spatial program and stores its results in the scene.
    pub fn refine_spatial(
        &self,
        scene: &SceneRep,
        subtask: &str,
        need: &InfoNeed,
        round: usize,
        trace: &mut Trace,
    ) -> Result<SceneRep, ReasoningError> {
        if need.kind != NeedKind::Spatial {
            return Err(ReasoningError::Precondition(format!(
                "spatial refinement requested for a `{}` need",
                need_name(need.kind)
            )));
        }
        let summary = scene_summary(scene);
        let prompt = self.prompts.render(
            "spatial_program",
            &[("ssr", &summary), ("subtask", subtask), ("detail", &need.detail)],
        )?;
        let reply: SpatialProgramReply = self.ask(prompt, trace)?;
        let program = SpatialProgram::from_reply(&reply)?;
        let out = interpret_spatial(scene, &program)?;
        trace.push(TraceEvent::SpatialRefinement {
            round,
            outputs: program.statements.iter().map(|s| s.target.to_string()).collect(),
            revision: out.revision(),
        });
        Ok(out)
    }

    pub fn resolve_edit(
        &self,
        scene: &SceneRep,
        subtask: &str,
        trace: &mut Trace,
    ) -> Result<EditStep, ReasoningError> {
        let summary = scene_summary(scene);
        let prompt = self
            .prompts
            .render("resolve", &[("ssr", &summary), ("subtask", subtask)])?;
        let reply: ResolveReply = self.ask(prompt, trace)?;

        let mut target_ids: Vec<ObjectId> = Vec::new();
        for id in reply.target_ids {
            if !scene.contains(id) {
                return Err(ReasoningError::Resolution(format!("object {id} does not exist")));
            }
            if !target_ids.contains(&id) {
                target_ids.push(id);
            }
        }
        let (w, h) = (scene.image_width(), scene.image_height());
        let op_kind = match reply.op {
            OpDoc::Add => OpKind::Add,
            OpDoc::Remove => OpKind::Remove,
            OpDoc::Replace => OpKind::Replace,
        };
        let mask = match op_kind {
            OpKind::Add => {
                let [x0, y0, x1, y1] = reply.placement.expect("schema requires placement for add");
                let b = BoundingBox::new(x0, y0, x1, y1)
                    .map_err(|e| ReasoningError::Resolution(format!("placement: {e}")))?;
                if !b.fits(w, h) {
                    return Err(ReasoningError::Resolution(format!(
                        "placement [{x0}, {y0}, {x1}, {y1}] exceeds the {w}x{h} image"
                    )));
                }
                BinaryMask::from_box(w, h, &b)?
            }
            OpKind::Remove | OpKind::Replace => {
                let mut mask = BinaryMask::empty(w, h)?;
                for id in &target_ids {
                    mask = mask.union(&scene.get(*id).expect("checked").mask)?;
                }
                mask
            }
        };
        let target_description = reply
            .replacement
            .map(|r| r.trim().to_string())
            .filter(|r| !r.is_empty());
        let instruction = reply.instruction.trim().to_string();
        let inpaint_prompt = match op_kind {
            OpKind::Remove => self.prompts.render("inpaint_remove", &[])?.trim().to_string(),
            _ => target_description.clone().unwrap_or_else(|| instruction.clone()),
        };
        trace.push(TraceEvent::Resolution {
            op: op_kind.name().into(),
            target_ids: target_ids.clone(),
            instruction: instruction.clone(),
            inpaint_prompt: inpaint_prompt.clone(),
            mask_area: mask.area(),
        });
        Ok(EditStep {
            target_ids,
            mask,
            explicit_instruction: instruction,
            op_kind,
            target_description,
            inpaint_prompt,
        })
    }

    /// Refines `scene` until the assessor is satisfied, then resolves the
    /// subtask. Fails with `IterationLimit` once `cap` refinement rounds have
    /// not been enough.
    pub fn plan_subtask(
        &self,
        mut scene: SceneRep,
        image: &RgbImage,
        j: usize,
        subtask: &str,
        trace: &mut Trace,
    ) -> Result<(SceneRep, EditStep), ReasoningError> {
        trace.enter_subtask(j, subtask);
        let mut rounds = 0;
        let mut semantic_steps = 0;
        loop {
            let need = self.assess_sufficiency(&scene, subtask, rounds, trace)?;
            if need.kind == NeedKind::None {
                break;
            }
            if rounds == self.config.cap {
                return Err(ReasoningError::IterationLimit {
                    subtask: j,
                    cap: self.config.cap,
                    trace: Box::new(trace.clone()),
                });
            }
            scene = match need.kind {
                NeedKind::Semantic => {
                    let s = self.refine_semantic(&scene, image, &need, semantic_steps, trace)?;
                    semantic_steps += 1;
                    s
                }
                _ => self.refine_spatial(&scene, subtask, &need, rounds, trace)?,
            };
            rounds += 1;
        }
        let step = self.resolve_edit(&scene, subtask, trace)?;
        trace.leave_subtask();
        Ok((scene, step))
    }

    /// Plans every subtask against the scene built from `image`, carrying
    /// refinements forward from one subtask to the next. No edit is applied.
    pub fn run_chain(&self, image: &RgbImage, q: &str) -> Result<EditPlan, ReasoningError> {
        let mut trace = Trace::new();
        let mut scene = build_ssr(image, self.gw, self.config.tau)?;
        trace.push(TraceEvent::SsrBuilt {
            objects: scene.len(),
            revision: scene.revision(),
        });
        let task = self.decompose_query(q, &mut trace)?;
        let mut steps = Vec::with_capacity(task.subtasks.len());
        for (i, subtask) in task.subtasks.iter().enumerate() {
            let (next, step) = self.plan_subtask(scene, image, i + 1, subtask, &mut trace)?;
            scene = next;
            steps.push(step);
        }
        Ok(EditPlan { task, steps, trace })
    }
}

/// Human-readable plan listing used by dry runs.
pub fn render_plan(plan: &EditPlan) -> String {
    let mut out = format!("query: {}\n", plan.task.source_query);
    for (i, step) in plan.steps.iter().enumerate() {
        out += &format!(
            "step {}: {} ids={:?} area={} prompt=\"{}\"\n  {}\n",
            i + 1,
            step.op_kind.name(),
            step.target_ids,
            step.mask.area(),
            step.inpaint_prompt,
            step.explicit_instruction,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{Palette, PaletteEntry, ScriptedChat};
    use crate::ssr::Detection;
    use image::Rgb;
    use std::sync::Arc;

    const RED: [u8; 3] = [200, 0, 0];
    const BLUE: [u8; 3] = [0, 0, 200];
    const YELLOW: [u8; 3] = [230, 220, 0];
    const GREEN: [u8; 3] = [0, 180, 0];

    fn paint(img: &mut RgbImage, c: [u8; 3], xs: std::ops::Range<u32>, ys: std::ops::Range<u32>) {
        for y in ys {
            for x in xs.clone() {
                img.put_pixel(x, y, Rgb(c));
            }
        }
    }

    fn image() -> RgbImage {
        let mut img = RgbImage::new(24, 16);
        paint(&mut img, RED, 2..6, 2..6);
        paint(&mut img, BLUE, 14..20, 8..14);
        paint(&mut img, YELLOW, 8..11, 10..13);
        paint(&mut img, GREEN, 18..22, 1..4);
        img
    }

    fn palette() -> Arc<Palette> {
        Arc::new(Palette::new(
            [0, 0, 0],
            vec![
                PaletteEntry::new(RED, "cup", 0.8),
                PaletteEntry::new(BLUE, "cup", 0.3),
                PaletteEntry::new(YELLOW, "lemon", 0.6).hint_only(),
                PaletteEntry::new(GREEN, "plant", 0.2).confidence(0.6),
            ],
        ))
    }

    fn gateway(replies: &[&str]) -> (Gateway, Arc<ScriptedChat>) {
        let chat = Arc::new(ScriptedChat::new(replies.iter().copied()));
        let p = palette();
        let gw = Gateway::new()
            .with_segmenter(p.clone())
            .with_detector(p.clone())
            .with_depth(p)
            .with_chat(chat.clone());
        (gw, chat)
    }

    fn scene(gw: &Gateway) -> SceneRep {
        build_ssr(&image(), gw, DEFAULT_TAU).unwrap()
    }

    fn with<T>(replies: &[&str], f: impl FnOnce(&Reasoner, &Gateway) -> T) -> T {
        let (gw, _) = gateway(replies);
        let prompts = PromptSet::builtin();
        let r = Reasoner::new(&gw, &prompts, ChainConfig::default()).unwrap();
        f(&r, &gw)
    }

    #[test]
    fn initial_scene() {
        with(&[], |_, gw| {
            let s = scene(gw);
            let summary: Vec<_> = s.objects().iter().map(|o| (o.id, o.label.clone(), o.depth)).collect();
            assert_eq!(
                summary,
                vec![
                    (1, Some("cup".to_string()), Some(0.8)),
                    (2, Some("cup".to_string()), Some(0.3)),
                    (3, None, Some(0.6)),
                ]
            );
        });
    }

    #[test]
    fn decompose_cases() {
        with(&[r#"{"subtasks":["remove the nearest cup"]}"#], |r, _| {
            let plan = r.decompose_query("get rid of the closest cup", &mut Trace::new()).unwrap();
            assert_eq!(plan.subtasks, vec!["get rid of the closest cup"]);
        });
        with(&[r#"{"subtasks":["b first","a second"]}"#], |r, _| {
            let plan = r.decompose_query("q", &mut Trace::new()).unwrap();
            assert_eq!(plan.subtasks, vec!["b first", "a second"]);
        });
        with(&[r#"{"subtasks":[]}"#, r#"{"subtasks":[]}"#], |r, _| {
            assert!(matches!(
                r.decompose_query("q", &mut Trace::new()),
                Err(ReasoningError::Gateway(GatewayError::MalformedLlmOutput { .. }))
            ));
        });
        with(&[], |r, _| {
            assert!(matches!(r.decompose_query("  ", &mut Trace::new()), Err(ReasoningError::Precondition(_))));
        });
    }

    #[test]
    fn assess_cases() {
        let s = with(&[], |_, gw| scene(gw));
        for (reply, kind) in [
            (r#"{"need":"none"}"#, NeedKind::None),
            (r#"{"need":"semantic","detail":"no food items labeled"}"#, NeedKind::Semantic),
            (r#"{"need":"spatial","detail":"relative positions unknown"}"#, NeedKind::Spatial),
        ] {
            with(&[reply], |r, _| {
                let need = r.assess_sufficiency(&s, "q", 0, &mut Trace::new()).unwrap();
                assert_eq!(need.kind, kind);
                assert_eq!(need.detail.is_empty(), kind == NeedKind::None);
            });
        }
    }

    #[test]
    fn semantic_refinement_labels_unlabeled_object() {
        with(&[], |r, gw| {
            let before = scene(gw);
            let need = InfoNeed {
                kind: NeedKind::Semantic,
                detail: "lemon".into(),
            };
            let mut trace = Trace::new();
            let after = r.refine_semantic(&before, &image(), &need, 0, &mut trace).unwrap();
            assert_eq!(after.revision(), 1);
            // Oracle: label assignment over the enlarged detection set.
            let dets: Vec<Detection> = gw.detect(&image(), Some(&["lemon".to_string()])).unwrap();
            let masks: Vec<_> = before.objects().iter().map(|o| o.mask.clone()).collect();
            let expected = assign_labels(&masks, &dets, DEFAULT_TAU).unwrap();
            assert_eq!(after.get(3).unwrap().label, expected[2].label);
            assert_eq!(after.get(3).unwrap().label.as_deref(), Some("lemon"));
            assert_eq!(after.len(), 3);
            for (a, b) in before.objects().iter().zip(after.objects()) {
                assert_eq!((a.id, &a.mask, a.depth), (b.id, &b.mask, b.depth));
            }
        });
    }

    #[test]
    fn semantic_refinement_noop_and_lower_threshold() {
        with(&[], |r, gw| {
            let before = scene(gw);
            let need = InfoNeed {
                kind: NeedKind::Semantic,
                detail: "banana".into(),
            };
            let mut trace = Trace::new();
            let after = r.refine_semantic(&before, &image(), &need, 0, &mut trace).unwrap();
            let mut expected = before.clone();
            expected.bump_revision();
            assert_eq!(after, expected);
            assert!(matches!(trace.records()[0].event, TraceEvent::SemanticRefinement { noop: true, .. }));

            // Third schedule entry (0.50) reveals the low-confidence plant.
            let after = r.refine_semantic(&before, &image(), &need, 2, &mut trace).unwrap();
            assert_eq!(after.len(), 4);
            let plant = after.get(4).unwrap();
            assert_eq!(plant.label.as_deref(), Some("plant"));
            assert_eq!(plant.depth, Some(0.2));
        });
    }

    #[test]
    fn semantic_refinement_requires_semantic_need() {
        with(&[], |r, gw| {
            let need = InfoNeed {
                kind: NeedKind::Spatial,
                detail: "x".into(),
            };
            assert!(matches!(
                r.refine_semantic(&scene(gw), &image(), &need, 0, &mut Trace::new()),
                Err(ReasoningError::Precondition(_))
            ));
        });
    }

    #[test]
    fn resolve_cases() {
        with(&[r#"{"op":"remove","target_ids":[2],"instruction":"remove the cup"}"#], |r, gw| {
            let s = scene(gw);
            let step = r.resolve_edit(&s, "q", &mut Trace::new()).unwrap();
            assert_eq!(step.mask, s.get(2).unwrap().mask);
            assert_eq!(step.op_kind, OpKind::Remove);
            assert!(step.inpaint_prompt.contains("background"));
        });
        with(
            &[r#"{"op":"replace","target_ids":[1,3],"instruction":"turn them into oranges","replacement":"an orange"}"#],
            |r, gw| {
                let s = scene(gw);
                let step = r.resolve_edit(&s, "q", &mut Trace::new()).unwrap();
                let oracle = BinaryMask::from_fn(24, 16, |x, y| {
                    s.get(1).unwrap().mask.get(x, y) || s.get(3).unwrap().mask.get(x, y)
                })
                .unwrap();
                assert_eq!(step.mask, oracle);
                assert_eq!(step.inpaint_prompt, "an orange");
            },
        );
        with(&[r#"{"op":"remove","target_ids":[99],"instruction":"remove it"}"#], |r, gw| {
            assert!(matches!(
                r.resolve_edit(&scene(gw), "q", &mut Trace::new()),
                Err(ReasoningError::Resolution(_))
            ));
        });
        with(
            &[r#"{"op":"add","instruction":"add a bird","replacement":"a bird","placement":[0,0,3,1]}"#],
            |r, gw| {
                let step = r.resolve_edit(&scene(gw), "q", &mut Trace::new()).unwrap();
                assert!(step.target_ids.is_empty());
                assert_eq!(step.mask.area(), 8);
            },
        );
        with(
            &[r#"{"op":"add","instruction":"add","placement":[0,0,30,1]}"#],
            |r, gw| {
                assert!(matches!(
                    r.resolve_edit(&scene(gw), "q", &mut Trace::new()),
                    Err(ReasoningError::Resolution(_))
                ));
            },
        );
    }

    #[test]
    fn spatial_round_stores_attrs() {
        with(
            &[
                r#"{"need":"spatial","detail":"which cup is nearer"}"#,
                r#"{"statements":[{"output":"target","expr":"nearest(\"cup\")"}]}"#,
                r#"{"need":"none"}"#,
                r#"{"op":"remove","target_ids":[2],"instruction":"remove the blue cup"}"#,
            ],
            |r, gw| {
                let mut trace = Trace::new();
                let (s, step) = r.plan_subtask(scene(gw), &image(), 1, "remove the nearest cup", &mut trace).unwrap();
                assert_eq!(s.attrs["target"], crate::ssr::AttrValue::Object(2));
                assert_eq!(s.revision(), 1);
                assert_eq!(step.target_ids, vec![2]);
            },
        );
    }

    #[test]
    fn cap_reached() {
        let mut replies = Vec::new();
        for _ in 0..6 {
            replies.push(r#"{"need":"spatial","detail":"positions"}"#);
            replies.push(r#"{"statements":[{"output":"n","expr":"count(\"cup\")"}]}"#);
        }
        with(&replies, |r, gw| {
            let err = r
                .plan_subtask(scene(gw), &image(), 1, "q", &mut Trace::new())
                .unwrap_err();
            let ReasoningError::IterationLimit { subtask, cap, trace } = err else { panic!("{err:?}") };
            assert_eq!((subtask, cap), (1, 5));
            assert_eq!(trace.count(|e| matches!(e, TraceEvent::Assessment { .. })), 6);
            assert_eq!(trace.count(|e| matches!(e, TraceEvent::SpatialRefinement { .. })), 5);
        });
    }

    #[test]
    fn zero_cap_rejected() {
        let gw = Gateway::new();
        let p = PromptSet::builtin();
        let cfg = ChainConfig {
            cap: 0,
            ..ChainConfig::default()
        };
        assert!(Reasoner::new(&gw, &p, cfg).is_err());
    }
}
