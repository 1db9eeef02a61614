import time, torch, numpy as np
from splitdoor import toydata, textenc, metrics, pipeline, diffusion
from splitdoor.diffusion import linear_schedule, forward_noise

ds = toydata.build_dataset(2048, 11)
mm = metrics.train_metric_models(ds, seed=5)
print("metric models ready", mm.style_accuracy, mm.attribute_accuracy, flush=True)

vocab = textenc.build_vocab(extra_tokens=("а","mcdonald","cf"))
sched = linear_schedule()
ec = textenc.EncoderConfig(vocab_size=len(vocab))
dc = diffusion.DenoiserConfig()
encoder = textenc.make_encoder(ec, vocab, 21)
denoiser = diffusion.make_denoiser(dc, 22)
gen = torch.Generator().manual_seed(23)
images = diffusion.images_to_tensor([i.image for i in ds])
ids = torch.tensor([textenc.tokenize(i.caption, vocab) for i in ds], dtype=torch.long)
opt = torch.optim.Adam(list(encoder.parameters())+list(denoiser.parameters()), lr=2e-3)
fwd = diffusion.training_forward(denoiser)
n = images.shape[0]; bs = 128
heldout = [i.caption for i in toydata.build_dataset(64, 99)]
t0 = time.time()
for epoch in range(1, 301):
    perm = torch.randperm(n, generator=gen)
    for start in range(0, n, bs):
        idx = perm[start:start+bs]
        t = torch.randint(1, sched.T+1, (len(idx),), generator=gen)
        eps = torch.randn(images[idx].shape, generator=gen)
        z = forward_noise(images[idx], t, eps, sched)
        pred = fwd(z, t, encoder(ids[idx]))
        loss = ((pred-eps)**2).mean()
        opt.zero_grad(); loss.backward(); opt.step()
    if epoch % 25 == 0:
        pipe = pipeline.assemble(encoder, denoiser, sched, vocab)
        ag = pipeline.semantic_agreement(pipe, heldout, mm.extractor, seed=1234)
        print(f"epoch {epoch} loss {loss.item():.4f} agreement {ag} elapsed {time.time()-t0:.0f}s", flush=True)
        torch.save({"enc": encoder.state_dict(), "dm": denoiser.state_dict(), "epoch": epoch},
                   f"/root/pkg/.calib/clean_{epoch}.pt")
