"""Copy task: the model must reproduce its input sequence."""
import argparse

import numpy as np

from pivotmt.nmt import Hyperparams, init_model, train, translate_batch


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--vocab", type=int, default=12)
    ap.add_argument("--pairs", type=int, default=500)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--batch-size", type=int, default=4)
    ap.add_argument("--seed", type=int, default=6)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)

    def pairs(n):
        return [([x], x) for x in ([int(t) for t in rng.integers(4, args.vocab, size=rng.integers(1, 9))]
                                   for _ in range(n))]

    train_set, test_set = pairs(args.pairs), pairs(200)
    hp = Hyperparams(emb_dim=16, hidden_dim=32, enc_layers=1, vocab_size_src=(args.vocab,),
                     vocab_size_tgt=args.vocab, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    model, hist = train(init_model(hp), train_set)
    for h in hist:
        print(f"epoch {h.epoch:2d}  loss {h.mean_loss:.4f}  lr {h.lr:g}")
    out = translate_batch(model, [s for s, _ in test_set], 20)
    print("exact match", np.mean([o == y for o, (_, y) in zip(out, test_set)]))


if __name__ == "__main__":
    main()
