"""Small synthetic dataset exports for exercising the replay paths."""

import numpy as np

GWEI = 10**9


def write_dataset(directory, first_height, n_blocks, seed=0):
    """Write blocks.csv and txs.csv with ``n_blocks`` random blocks."""
    rng = np.random.default_rng(seed)
    blocks = ["height,base_fee_wei,gas_used,gas_limit"]
    txs = ["tx_id,block_height,tx_type,max_fee_wei,max_priority_fee_wei,gas_limit"]
    tx_id = 0
    for i in range(n_blocks):
        h = first_height + i
        used = 0
        for _ in range(int(rng.integers(0, 6))):
            gas = int(rng.choice([21_000, 150_000, 1_000_000]))
            fee = int(rng.integers(30, 60)) * GWEI
            if rng.random() < 0.5:
                txs.append(f"{tx_id},{h},0,{fee},{fee},{gas}")
            else:
                txs.append(f"{tx_id},{h},1,{fee},{2 * GWEI},{gas}")
            tx_id += 1
            used += gas
        blocks.append(f"{h},{30 * GWEI},{min(used, 30_000_000)},30000000")
    b, t = directory / "blocks.csv", directory / "txs.csv"
    b.write_text("\n".join(blocks) + "\n")
    t.write_text("\n".join(txs) + "\n")
    return b, t
