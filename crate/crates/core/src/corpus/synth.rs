use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AttributeType, Report, Span};
use crate::error::{Error, Result};

/// Phrase tables the generator draws from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabularyTables {
    /// `(site, cancer noun)` pairs, e.g. `("左肺上叶", "肺癌")`.
    pub primary_sites: Vec<(String, String)>,
    pub lesions: Vec<String>,
    pub metastasis_targets: Vec<String>,
    /// Neutral sentences mixed into cancer reports.
    pub distractor_sentences: Vec<String>,
    /// Sentences for non-cancer reports; must avoid the filter keywords.
    pub benign_findings: Vec<String>,
    pub benign_impressions: Vec<String>,
    pub findings_headers: Vec<String>,
    pub impression_headers: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for VocabularyTables {
    fn default() -> Self {
        let sites = [
            ("左肺上叶", "肺癌"),
            ("左肺下叶", "肺癌"),
            ("右肺上叶", "肺癌"),
            ("右肺中叶", "肺癌"),
            ("右肺下叶", "肺癌"),
            ("胃窦", "胃癌"),
            ("胃体", "胃癌"),
            ("贲门", "贲门癌"),
            ("肝右叶", "肝癌"),
            ("肝左叶", "肝癌"),
            ("左侧乳腺", "乳腺癌"),
            ("右侧乳腺", "乳腺癌"),
            ("乙状结肠", "结肠癌"),
            ("升结肠", "结肠癌"),
            ("直肠", "直肠癌"),
            ("胰头", "胰腺癌"),
            ("胰体尾", "胰腺癌"),
            ("食管中段", "食管癌"),
            ("左肾", "肾癌"),
            ("右肾", "肾癌"),
            ("膀胱", "膀胱癌"),
            ("甲状腺左叶", "甲状腺癌"),
            ("宫颈", "宫颈癌"),
            ("鼻咽", "鼻咽癌"),
        ];
        VocabularyTables {
            primary_sites: sites
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            lesions: strings(&["肿块影", "软组织密度影", "不规则占位", "结节影", "团块状异常信号"]),
            metastasis_targets: strings(&[
                "肝",
                "骨",
                "脑",
                "双肺",
                "肾上腺",
                "纵隔淋巴结",
                "腹膜后淋巴结",
                "胸膜",
                "腹膜",
                "锁骨上淋巴结",
            ]),
            distractor_sentences: strings(&[
                "边界不清。",
                "增强扫描呈不均匀强化。",
                "纵隔内未见肿大淋巴结。",
                "双侧胸腔未见积液。",
                "肝脏形态大小正常。",
                "胆囊未见异常。",
                "脾脏不大。",
                "心影大小正常。",
                "骨质结构未见明显破坏。",
                "周围可见毛刺。",
            ]),
            benign_findings: strings(&[
                "各房室大小正常，室壁运动协调。",
                "肝内见类圆形低密度影，边界清。",
                "胆囊内见强回声光团。",
                "甲状腺右叶见低回声结节。",
                "双肺纹理增粗。",
                "左肾见小囊状无回声区。",
            ]),
            benign_impressions: strings(&[
                "心脏结构未见明显异常。",
                "肝囊肿。",
                "胆囊结石。",
                "甲状腺结节，建议随访。",
                "支气管炎表现。",
                "左肾囊肿。",
            ]),
            findings_headers: strings(&["检查所见：", "影像所见：", "影像描述："]),
            impression_headers: strings(&["印象：", "诊断意见：", "影像诊断："]),
        }
    }
}

/// Generator parameters. Identical specs produce identical corpora.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_reports: usize,
    /// Probability that a cancer report lacks each attribute, independently.
    pub noise_rate: f64,
    /// Fraction of non-cancer reports the keyword filter must reject.
    pub distractor_rate: f64,
    /// Fraction of reports whose impression precedes the findings.
    pub swap_rate: f64,
    pub tables: VocabularyTables,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            n_reports: 100,
            noise_rate: 0.1,
            distractor_rate: 0.1,
            swap_rate: 0.2,
            tables: VocabularyTables::default(),
        }
    }
}

impl SyntheticSpec {
    pub fn new(seed: u64, n_reports: usize) -> Self {
        SyntheticSpec {
            seed,
            n_reports,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let t = &self.tables;
        let tables: [(&str, usize); 8] = [
            ("primary_sites", t.primary_sites.len()),
            ("lesions", t.lesions.len()),
            ("metastasis_targets", t.metastasis_targets.len()),
            ("distractor_sentences", t.distractor_sentences.len()),
            ("benign_findings", t.benign_findings.len()),
            ("benign_impressions", t.benign_impressions.len()),
            ("findings_headers", t.findings_headers.len()),
            ("impression_headers", t.impression_headers.len()),
        ];
        if let Some((name, _)) = tables.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Config(format!("vocabulary table `{name}` is empty")));
        }
        for (name, p) in [
            ("noise_rate", self.noise_rate),
            ("distractor_rate", self.distractor_rate),
            ("swap_rate", self.swap_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Accumulates text while recording span offsets in characters.
#[derive(Default)]
struct TextBuilder {
    text: String,
    len: usize,
    spans: Vec<Span>,
}

impl TextBuilder {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.len += s.chars().count();
    }

    fn push_span(&mut self, s: &str, kind: AttributeType) {
        let start = self.len;
        self.push(s);
        self.spans.push(Span::new(start, self.len, kind));
    }

    fn append(&mut self, other: TextBuilder) {
        let offset = self.len;
        self.push(&other.text);
        self.spans.extend(
            other
                .spans
                .into_iter()
                .map(|s| Span::new(s.start + offset, s.end + offset, s.kind)),
        );
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("tables validated non-empty")
}

fn decimal(rng: &mut ChaCha8Rng) -> String {
    let tenths: u32 = rng.gen_range(5..100);
    format!("{}.{}", tenths / 10, tenths % 10)
}

fn lesion_size(rng: &mut ChaCha8Rng) -> String {
    match rng.gen_range(0..4) {
        0 => format!("{}cm×{}cm", decimal(rng), decimal(rng)),
        1 => format!("{}×{}cm", decimal(rng), decimal(rng)),
        2 => format!("{}mm×{}mm", rng.gen_range(5..90), rng.gen_range(5..90)),
        _ => format!("{}cm", decimal(rng)),
    }
}

fn push_metastases(b: &mut TextBuilder, targets: &[&String]) {
    for (i, m) in targets.iter().enumerate() {
        if i > 0 {
            b.push("、");
        }
        b.push_span(m, AttributeType::MetastasisSite);
    }
}

fn cancer_report(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> TextBuilder {
    let t = &spec.tables;
    let has_primary = !rng.gen_bool(spec.noise_rate);
    let has_size = !rng.gen_bool(spec.noise_rate);
    let has_metastasis = !rng.gen_bool(spec.noise_rate);
    let (site, cancer) = pick(rng, &t.primary_sites).clone();
    let metastases: Vec<&String> = if has_metastasis {
        let n = if rng.gen_bool(0.3) { 2 } else { 1 };
        t.metastasis_targets.choose_multiple(rng, n).collect()
    } else {
        Vec::new()
    };

    let mut findings = TextBuilder::default();
    findings.push(pick(rng, &t.findings_headers));
    if has_primary {
        findings.push_span(&site, AttributeType::PrimarySite);
    } else {
        findings.push(if rng.gen_bool(0.5) { "扫描范围内" } else { "局部" });
    }
    findings.push("见");
    findings.push(pick(rng, &t.lesions));
    if has_size {
        findings.push(*["，大小约", "，范围约", "，最大截面约"].choose(rng).unwrap());
        findings.push_span(&lesion_size(rng), AttributeType::LesionSize);
    } else {
        findings.push("，边界欠清");
    }
    findings.push("。");
    let n_fill = rng.gen_range(1..=2);
    for s in t.distractor_sentences.choose_multiple(rng, n_fill) {
        findings.push(s);
    }
    if has_metastasis && rng.gen_bool(0.4) {
        push_metastases(&mut findings, &metastases);
        findings.push("见多发结节，考虑转移。");
    }

    let mut impression = TextBuilder::default();
    impression.push(pick(rng, &t.impression_headers));
    if has_primary {
        impression.push_span(&site, AttributeType::PrimarySite);
        impression.push(&cancer);
    } else {
        impression.push("考虑恶性肿瘤");
    }
    if has_metastasis {
        match rng.gen_range(0..3) {
            0 => {
                impression.push("，伴");
                push_metastases(&mut impression, &metastases);
                impression.push("转移");
            }
            1 => {
                impression.push("，");
                push_metastases(&mut impression, &metastases);
                impression.push("转移可能");
            }
            _ => {
                impression.push("并");
                push_metastases(&mut impression, &metastases);
                impression.push("转移");
            }
        }
    }
    impression.push("。");
    if rng.gen_bool(0.3) {
        impression.push("建议进一步检查。");
    }

    let mut report = TextBuilder::default();
    if rng.gen_bool(spec.swap_rate) {
        report.append(impression);
        report.append(findings);
    } else {
        report.append(findings);
        report.append(impression);
    }
    report
}

fn benign_report(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> TextBuilder {
    let t = &spec.tables;
    let mut b = TextBuilder::default();
    b.push(pick(rng, &t.findings_headers));
    let n = rng.gen_range(1..=2);
    for s in t.benign_findings.choose_multiple(rng, n) {
        b.push(s);
    }
    b.push(pick(rng, &t.impression_headers));
    b.push(pick(rng, &t.benign_impressions));
    b
}

/// Generates `spec.n_reports` annotated reports with exact gold offsets.
pub fn generate_corpus(spec: &SyntheticSpec) -> Result<Vec<Report>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let reports = (0..spec.n_reports)
        .map(|i| {
            let built = if rng.gen_bool(spec.distractor_rate) {
                benign_report(spec, &mut rng)
            } else {
                cancer_report(spec, &mut rng)
            };
            Report::new(format!("r{i:05}"), built.text).with_spans(built.spans)
        })
        .collect();
    Ok(reports)
}
