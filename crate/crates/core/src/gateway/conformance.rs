//! Black-box protocol checks shared by the in-process mocks and live
//! adapters. Everything goes through the validating [`Gateway`], so a pass
//! means the backend's output survived the same checks the engine applies.

use std::fmt;

use image::{Rgb, RgbImage};

use super::{ChatRequest, EmbedPayload, EmbedTag, Gateway, GatewayError, Service};
use crate::ssr::{BinaryMask, BoundingBox};

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Pass,
    Fail(String),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub service: Service,
    pub name: &'static str,
    pub outcome: Outcome,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Outcome::Pass => write!(f, "PASS {}/{}", self.service, self.name),
            Outcome::Fail(why) => write!(f, "FAIL {}/{}: {why}", self.service, self.name),
            Outcome::Skipped(why) => write!(f, "SKIP {}/{}: {why}", self.service, self.name),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        !self.checks.iter().any(|c| matches!(c.outcome, Outcome::Fail(_)))
    }

    pub fn count(&self, pred: fn(&Outcome) -> bool) -> usize {
        self.checks.iter().filter(|c| pred(&c.outcome)).count()
    }

    fn push(&mut self, service: Service, name: &'static str, result: Result<(), String>) {
        self.checks.push(Check {
            service,
            name,
            outcome: match result {
                Ok(()) => Outcome::Pass,
                Err(e) => Outcome::Fail(e),
            },
        });
    }
}

/// 32×24 probe: dark background, a red block and a green block.
pub fn probe_image() -> RgbImage {
    RgbImage::from_fn(32, 24, |x, y| {
        if (4..12).contains(&x) && (4..12).contains(&y) {
            Rgb([220, 30, 30])
        } else if (18..28).contains(&x) && (10..20).contains(&y) {
            Rgb([30, 200, 40])
        } else {
            Rgb([10, 10, 10])
        }
    })
}

pub fn probe_mask() -> BinaryMask {
    BinaryMask::from_box(32, 24, &BoundingBox::new(4, 4, 11, 11).expect("valid box")).expect("fits")
}

fn err(e: GatewayError) -> String {
    e.to_string()
}

/// Runs every check for each configured service; unconfigured services are
/// reported as skipped.
pub fn run(gw: &Gateway) -> Report {
    let image = probe_image();
    let (w, h) = image.dimensions();
    let mut report = Report::default();
    for service in Service::ALL {
        if !gw.has(service) {
            report.checks.push(Check {
                service,
                name: "configured",
                outcome: Outcome::Skipped("no backend".into()),
            });
            continue;
        }
        match service {
            Service::Segment => {
                report.push(service, "masks-in-bounds", gw.segment(&image, None).map(|_| ()).map_err(err));
                report.push(
                    service,
                    "accepts-threshold",
                    gw.segment(&image, Some(0.5)).map(|_| ()).map_err(err),
                );
            }
            Service::Detect => {
                report.push(service, "boxes-in-bounds", gw.detect(&image, None).map(|_| ()).map_err(err));
                let hint = vec!["block".to_string()];
                report.push(
                    service,
                    "accepts-vocab-hint",
                    gw.detect(&image, Some(&hint)).map(|_| ()).map_err(err),
                );
            }
            Service::Depth => {
                report.push(service, "depth-in-range", gw.estimate_depth(&image).map(|_| ()).map_err(err));
            }
            Service::Inpaint => {
                let mask = probe_mask();
                report.push(
                    service,
                    "preserves-outside-mask",
                    gw.inpaint(&image, &mask, "fill the region with background").map(|_| ()).map_err(err),
                );
                let bad = BinaryMask::full(w + 1, h).expect("nonzero");
                let rejected = match gw.inpaint(&image, &bad, "x") {
                    Err(GatewayError::InvalidRequest { .. }) => Ok(()),
                    other => Err(format!("mismatched mask accepted: {other:?}")),
                };
                report.push(service, "rejects-mismatched-mask", rejected);
            }
            Service::Embed => embed_checks(gw, &image, &mut report),
            Service::Chat => {
                let result = gw
                    .chat(&ChatRequest::user(
                        "decompose",
                        "Split this editing request into ordered steps and reply as JSON: remove the red block",
                    ))
                    .map(|_| ())
                    .map_err(err);
                report.push(service, "schema-constrained-reply", result);
            }
        }
    }
    report
}

fn embed_checks(gw: &Gateway, image: &RgbImage, report: &mut Report) {
    let probes: [(&'static str, EmbedTag, EmbedPayload<'_>); 4] = [
        ("clip-image", EmbedTag::ClipImage, EmbedPayload::Image(image)),
        ("clip-text", EmbedTag::ClipText, EmbedPayload::Text("a red block")),
        ("dino", EmbedTag::Dino, EmbedPayload::Image(image)),
        ("lpips-distance", EmbedTag::LpipsDistance, EmbedPayload::ImagePair(image, image)),
    ];
    for (name, tag, payload) in probes {
        let outcome = match gw.embed(&payload, tag) {
            Ok(_) => Outcome::Pass,
            // One model per adapter process: other tags are legitimately refused.
            Err(GatewayError::InvalidRequest { detail, .. }) => Outcome::Skipped(detail),
            Err(e) => Outcome::Fail(e.to_string()),
        };
        report.checks.push(Check {
            service: Service::Embed,
            name,
            outcome,
        });
    }
}
