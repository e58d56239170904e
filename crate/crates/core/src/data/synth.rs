use std::path::Path;

use rand::Rng;

use super::SyntheticSample;
use crate::error::{Error, Result};
use crate::kv::KvFile;
use crate::rng::stream;
use crate::tokens::{Label, Vocab};

/// Generator parameters. Each modality segment carries exactly one cue
/// token among uniform distractors; with probability `cue_*` the cue names
/// the modality's true veracity, otherwise the opposite one.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub img_len: usize,
    pub txt_len: usize,
    pub cue_img: f64,
    pub cue_txt: f64,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_test: 400,
            img_len: 8,
            txt_len: 8,
            cue_img: 0.65,
            cue_txt: 0.95,
            vocab_size: 96,
            seed: 0,
        }
    }
}

const KEYS: &[&str] =
    &["n_train", "n_test", "img_len", "txt_len", "cue_img", "cue_txt", "vocab_size", "label_rule", "seed"];

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.img_len == 0 || self.txt_len == 0 {
            return Err(Error::invalid("segment length must be positive"));
        }
        for (name, p) in [("cue_img", self.cue_img), ("cue_txt", self.cue_txt)] {
            if !(p > 0.5 && p <= 1.0) {
                return Err(Error::invalid(format!("{name} = {p} outside (0.5, 1]")));
            }
        }
        if self.n_train == 0 {
            return Err(Error::invalid("n_train must be positive"));
        }
        Vocab::new(self.vocab_size)?;
        Ok(())
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        kv.check_keys(KEYS)?;
        if let Some(rule) = kv.raw("label_rule") {
            if rule != "OR" {
                return Err(Error::invalid(format!("label_rule must be OR, got {rule:?}")));
            }
        }
        let d = Self::default();
        let spec = Self {
            n_train: kv.get_or("n_train", d.n_train)?,
            n_test: kv.get_or("n_test", d.n_test)?,
            img_len: kv.get_or("img_len", d.img_len)?,
            txt_len: kv.get_or("txt_len", d.txt_len)?,
            cue_img: kv.get_or("cue_img", d.cue_img)?,
            cue_txt: kv.get_or("cue_txt", d.cue_txt)?,
            vocab_size: kv.get_or("vocab_size", d.vocab_size)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&KvFile::read(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "n_train={}\nn_test={}\nimg_len={}\ntxt_len={}\ncue_img={}\ncue_txt={}\nvocab_size={}\nlabel_rule=OR\nseed={}\n",
            self.n_train, self.n_test, self.img_len, self.txt_len, self.cue_img, self.cue_txt, self.vocab_size, self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub train: Vec<SyntheticSample>,
    pub test: Vec<SyntheticSample>,
}

fn segment(
    rng: &mut impl Rng,
    len: usize,
    distractors: std::ops::Range<usize>,
    cue: usize,
) -> Vec<usize> {
    let mut tokens: Vec<usize> = (0..len).map(|_| rng.gen_range(distractors.clone())).collect();
    let at = rng.gen_range(0..len);
    tokens[at] = cue;
    tokens
}

fn sample(spec: &CorpusSpec, vocab: &Vocab, id: u64) -> SyntheticSample {
    let mut rng = stream(spec.seed, &[id]);
    let pick = |rng: &mut rand_chacha::ChaCha8Rng| if rng.gen_bool(0.5) { Label::Fake } else { Label::Real };
    let y_img = pick(&mut rng);
    let y_txt = pick(&mut rng);
    let img_shown = if rng.gen::<f64>() < spec.cue_img { y_img } else { y_img.flip() };
    let txt_shown = if rng.gen::<f64>() < spec.cue_txt { y_txt } else { y_txt.flip() };
    let img_tokens = segment(&mut rng, spec.img_len, vocab.img_distractors(), vocab.img_cue(img_shown));
    let txt_tokens = segment(&mut rng, spec.txt_len, vocab.txt_distractors(), vocab.txt_cue(txt_shown));
    SyntheticSample {
        id,
        img_tokens,
        txt_tokens,
        y: y_img.or(y_txt),
        y_img: Some(y_img),
        y_txt: Some(y_txt),
    }
}

/// Pure function of the spec: train ids are `0..n_train`, test ids follow.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let vocab = Vocab::new(spec.vocab_size)?;
    let n_train = spec.n_train as u64;
    let train = (0..n_train).map(|id| sample(spec, &vocab, id)).collect();
    let test = (n_train..n_train + spec.n_test as u64).map(|id| sample(spec, &vocab, id)).collect();
    Ok(Corpus { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> CorpusSpec {
        CorpusSpec { n_train: n, n_test: 10, ..Default::default() }
    }

    #[test]
    fn zero_length_segment_rejected() {
        let s = CorpusSpec { img_len: 0, ..spec(5) };
        assert!(generate_corpus(&s).is_err());
        let s = CorpusSpec { cue_txt: 0.5, ..spec(5) };
        assert!(generate_corpus(&s).is_err());
    }

    #[test]
    fn or_rule_and_ranges_hold() {
        let c = generate_corpus(&spec(500)).unwrap();
        let v = Vocab::new(96).unwrap();
        for s in c.train.iter().chain(&c.test) {
            assert_eq!(s.y, s.y_img.unwrap().or(s.y_txt.unwrap()));
            assert!(s.img_tokens.iter().all(|t| v.img_range().contains(t)));
            assert!(s.txt_tokens.iter().all(|t| v.txt_range().contains(t)));
            let cues = s.img_tokens.iter().filter(|&&t| v.cue_label(t).is_some()).count();
            assert_eq!(cues, 1);
        }
    }

    #[test]
    fn fake_marginal_near_three_quarters() {
        let c = generate_corpus(&spec(4000)).unwrap();
        let fake = c.train.iter().filter(|s| s.y == Label::Fake).count() as f64 / 4000.0;
        assert!((fake - 0.75).abs() < 0.05, "{fake}");
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let a = generate_corpus(&spec(50)).unwrap();
        let b = generate_corpus(&spec(50)).unwrap();
        assert_eq!(a, b);
        let other = generate_corpus(&CorpusSpec { seed: 1, ..spec(50) }).unwrap();
        assert_ne!(a.train, other.train);
    }

    #[test]
    fn kv_round_trip() {
        let s = CorpusSpec { n_train: 12, cue_img: 0.7, seed: 9, ..Default::default() };
        let back = CorpusSpec::from_kv(&KvFile::parse(&s.to_kv_string()).unwrap()).unwrap();
        assert_eq!(s, back);
        assert!(CorpusSpec::from_kv(&KvFile::parse("label_rule=AND").unwrap()).is_err());
        assert!(CorpusSpec::from_kv(&KvFile::parse("bogus=1").unwrap()).is_err());
    }
}
