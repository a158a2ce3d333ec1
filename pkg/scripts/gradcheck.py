"""Central finite-difference check of every parameter gradient on a tiny model."""
import numpy as np

from pivotmt.nmt import Hyperparams, init_model, loss, loss_and_gradients, make_batch


def main(eps=1e-4):
    hp = Hyperparams(emb_dim=4, hidden_dim=8, enc_layers=1, vocab_size_src=(12, 12), vocab_size_tgt=12, seed=11)
    m = init_model(hp)
    rng = np.random.default_rng(0)
    seq = lambda: [int(x) for x in rng.integers(4, 12, size=rng.integers(1, 6))]
    srcs = [[seq(), seq()], [seq(), None], [None, seq()], [seq(), seq()]]
    batch = make_batch(srcs, [seq() for _ in srcs])
    _, grads = loss_and_gradients(m, batch)
    for name, p in m.params.items():
        worst = 0.0
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            lp = loss(m, batch)
            p[idx] = old - eps
            lm = loss(m, batch)
            p[idx] = old
            num, ana = (lp - lm) / (2 * eps), grads[name][idx]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), 1e-7))
        print(f"{name:<20} {str(p.shape):<10} max rel err {worst:.2e}")


if __name__ == "__main__":
    main()
