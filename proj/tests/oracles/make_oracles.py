"""Reference values frozen into the C++ tests.

Computed with librosa (filterbank), torch.stft (framing) and auraloss
(multi-resolution STFT distance), independently of the C++ code.
Run: python3 tests/oracles/make_oracles.py
"""
import numpy as np
import torch
import librosa
import auraloss

SR = 24000
T = 8192


def sig_a(n=T):
    i = np.arange(n)
    return (0.5 * np.sin(2 * np.pi * 440 * i / SR) + 0.2 * np.sin(2 * np.pi * 3000 * i / SR + 0.3)).astype(np.float32)


def sig_b(n=T):
    i = np.arange(n)
    return (0.4 * np.sin(2 * np.pi * 440 * i / SR + 0.1) + 0.05 * np.cos(2 * np.pi * 7000 * i / SR)).astype(np.float32)


def log_mel(x):
    basis = librosa.filters.mel(sr=SR, n_fft=1024, n_mels=100, fmin=0, fmax=12000)
    spec = torch.stft(torch.from_numpy(x).double(), 1024, hop_length=256, win_length=1024,
                      window=torch.hann_window(1024, dtype=torch.float64), center=True,
                      pad_mode="reflect", return_complex=True).abs().numpy()
    frames = -(-len(x) // 256)
    mel = basis.astype(np.float64) @ spec[:, :frames]
    return np.log(np.maximum(mel, 1e-5)).T  # frames x bins


mel = log_mel(sig_a())
print("mel frames", mel.shape[0])
for f, b in [(0, 0), (5, 7), (16, 20), (31, 50), (20, 99)]:
    print(f"mel[{f},{b}] = {mel[f, b]:.9g}")
print(f"mel sum = {mel.sum():.9g}")

odd = sig_a(5000)
print("mel frames T=5000", log_mel(odd).shape[0])
print(f"mel[19,3] T=5000 = {log_mel(odd)[19, 3]:.9g}")

centers = librosa.mel_frequencies(n_mels=102, fmin=0, fmax=12000)[1:-1]
print("bin nearest 440 Hz", int(np.argmin(np.abs(centers - 440))))

loss = auraloss.freq.MultiResolutionSTFTLoss()
x = torch.from_numpy(sig_b()).view(1, 1, -1)
y = torch.from_numpy(sig_a()).view(1, 1, -1)
print(f"mstft(ref=a, gen=b) = {loss(x, y).item():.9g}")
zero = torch.zeros_like(y)
print(f"mstft(ref=a, gen=0) = {loss(zero, y).item():.9g}")
print(f"mstft(ref=a, gen=2a) = {loss(2 * y, y).item():.9g}")
