use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use sociallab::config::ExperimentConfig;
use sociallab::policy::{build_observation, Checkpoint};
use sociallab::sim;
use sociallab::trainer::{actor_loss_grad, checkpoint_path, critic_loss_grad, ActorSample, METRICS_HEADER};
use sociallab::{Execution, FeatureFlags, Policy, PolicyArch, Solution, Trainer};

fn tiny_arch() -> PolicyArch {
    PolicyArch {
        embed: 5,
        heads: 1,
        hidden: 4,
        actor_output_scale: 1.0,
    }
}

fn central_difference(params: &[f64], i: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let h = 1e-5;
    let mut p = params.to_vec();
    p[i] += h;
    let up = f(&p);
    p[i] -= 2.0 * h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

#[test]
fn two_transition_losses_match_finite_differences() {
    let n = 4;
    let mut rng = Pcg64Mcg::seed_from_u64(8);
    let policy = Policy::new(n, FeatureFlags::PIR, tiny_arch(), 2).unwrap();
    let obs: Vec<_> = (0..2)
        .map(|_| {
            let me = (Solution::random(n, &mut rng), rng.gen_range(0.0..100.0));
            let nb: Vec<_> = (0..3)
                .map(|_| (Solution::random(n, &mut rng), rng.gen_range(0.0..100.0)))
                .collect();
            build_observation(me, &nb, FeatureFlags::PIR).unwrap()
        })
        .collect();
    let actions = [Solution::from_code(0b1010, n), Solution::from_code(0b0111, n)];
    let samples: Vec<ActorSample<'_>> = (0..2)
        .map(|i| ActorSample {
            observation: &obs[i],
            action: &actions[i],
            behavior_log_prob: -2.5,
            advantage: [0.7, -1.3][i],
        })
        .collect();

    let (_, g) = actor_loss_grad(&policy, &samples, 0.02, Execution::Sequential).unwrap();
    let base = policy.actor.params().to_vec();
    for i in 0..base.len() {
        let fd = central_difference(&base, i, |p| {
            let mut q = policy.clone();
            q.actor.params_mut().copy_from_slice(p);
            actor_loss_grad(&q, &samples, 0.02, Execution::Sequential).unwrap().0.total
        });
        let scale = g[i].abs().max(fd.abs()).max(1e-7);
        assert!((g[i] - fd).abs() / scale < 1e-4, "actor param {i}: {} vs {fd}", g[i]);
    }

    let refs: Vec<_> = obs.iter().collect();
    let targets = [0.4, -0.2];
    let (_, g) = critic_loss_grad(&policy, &refs, &targets, Execution::Sequential).unwrap();
    let base = policy.critic.params().to_vec();
    for i in 0..base.len() {
        let fd = central_difference(&base, i, |p| {
            let mut q = policy.clone();
            q.critic.params_mut().copy_from_slice(p);
            critic_loss_grad(&q, &refs, &targets, Execution::Sequential).unwrap().0
        });
        let scale = g[i].abs().max(fd.abs()).max(1e-7);
        assert!((g[i] - fd).abs() / scale < 1e-4, "critic param {i}: {} vs {fd}", g[i]);
    }
}

fn small_experiment() -> ExperimentConfig {
    ExperimentConfig::from_toml(
        r#"
seed = 5
[env]
n_loci = 6
k = 2
n_agents = 12
steps = 12
[batch]
n_landscapes = 8
reps = 4
[train]
max_epochs = 12
minibatch_size = 64
updates_per_epoch = 2
checkpoint_every = 5
lr_actor = 1e-3
lr_critic = 3e-3
[train.arch]
embed = 8
heads = 2
hidden = 8
actor_output_scale = 1.0
[train.early_stopping]
enabled = false
"#,
    )
    .unwrap()
}

fn trainer(cfg: &ExperimentConfig, exec: Execution) -> Trainer {
    let (env, topo) = cfg.resolve().unwrap();
    let tc = sociallab::TrainConfig { env, ..cfg.train_config() };
    Trainer::new(tc, topo, cfg.seed, exec).unwrap()
}

#[test]
fn run_writes_metrics_and_checkpoints() {
    let cfg = small_experiment();
    let dir = tempfile::tempdir().unwrap();
    let mut t = trainer(&cfg, Execution::Parallel);
    let summary = t.run(Some(dir.path())).unwrap();
    assert_eq!(summary.epochs, 12);
    assert!(!summary.stopped_early);

    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), METRICS_HEADER);
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 5);
        assert_eq!(r[0] as usize, i);
        assert!((0.0..=100.0).contains(&r[1]));
        // Mean per-bit Bernoulli entropy lies in [0, ln 2].
        assert!((0.0..=std::f64::consts::LN_2 + 1e-12).contains(&r[2]));
    }

    for epoch in [5, 10] {
        assert!(checkpoint_path(dir.path(), epoch).exists());
    }
    let ck = Checkpoint::load(&dir.path().join("final.json")).unwrap();
    assert_eq!(ck.epoch, Some(12));
    assert_eq!(ck.n_loci, 6);
    assert!(ck.config.is_some());
    let restored = ck.policy().unwrap();
    assert_eq!(&restored, t.policy());

    // A second run into the same directory must not clobber the log.
    let mut again = trainer(&cfg, Execution::Parallel);
    assert!(again.run(Some(dir.path())).is_err());
}

#[test]
fn evaluation_reproduces_logged_training_payoff() {
    // Near-zero learning rates keep the policy effectively fixed, so the logged
    // per-epoch payoffs and a later evaluation sample the same behavior.
    let mut cfg = small_experiment();
    cfg.train.lr_actor = 1e-12;
    cfg.train.lr_critic = 1e-12;
    cfg.train.max_epochs = 40;
    let mut t = trainer(&cfg, Execution::Parallel);
    t.run(None).unwrap();
    let logged: Vec<f64> = t.history().iter().map(|m| m.avg_mean_payoff).collect();
    let n = logged.len() as f64;
    let mean = logged.iter().sum::<f64>() / n;
    let sd = (logged.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();

    let (env, topo) = cfg.resolve().unwrap();
    let eval = sim::run_batch(&env, &topo, t.policy(), 40, 1, 1234, Execution::Parallel).unwrap();
    let se = (sd * sd / n + eval.average_sem.powi(2)).sqrt();
    assert!(
        (eval.average_mean_payoff - mean).abs() < 4.0 * se,
        "eval {} vs logged {mean} (se {se})",
        eval.average_mean_payoff
    );
}

#[test]
fn curriculum_switches_landscapes() {
    let mut cfg = ExperimentConfig::assemble(&["k3k11-e1000".to_string()], None).unwrap();
    cfg.env.n_agents = 12;
    let tc = cfg.train_config();
    assert_eq!(tc.env_at(0).k, 3);
    assert_eq!(tc.env_at(999).k, 3);
    assert_eq!(tc.env_at(1000).k, 11);
    assert_eq!(tc.env_at(4000).k, 11);
}

#[test]
fn checkpoint_version_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("ck.json");
    let policy = Policy::new(5, FeatureFlags::PIRF, tiny_arch(), 1).unwrap();
    let mut ck = policy.to_checkpoint(None, None);
    ck.version = 99;
    ck.save(&p).unwrap();
    assert!(matches!(
        Checkpoint::load(&p),
        Err(sociallab::Error::Version { found: 99, .. })
    ));
}
