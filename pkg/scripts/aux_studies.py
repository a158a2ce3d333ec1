"""Two auxiliary toy studies: the complementary two-source task and the noise sweep."""
from pivotmt.experiment import complementary_task, noise_sweep

if __name__ == "__main__":
    for p, b in noise_sweep().items():
        print(f"noise p={p:<4} BLEU {100 * b:6.2f}")
    for name, b in complementary_task().items():
        print(f"{name:<9} BLEU {100 * b:6.2f}")
