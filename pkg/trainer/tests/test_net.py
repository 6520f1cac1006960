import torch

from stepsafe_trainer.net import build_net


def _input(b=2, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(b, 2, 28, 20, generator=g)


def test_output_shapes_and_finiteness():
    net = build_net(12, True, seed=0)
    h, e = net(_input())
    assert h.shape == (2, 1, 28, 20)
    assert e.shape == (2, 1, 28, 20)
    assert torch.isfinite(h).all() and torch.isfinite(e).all()


def test_parameter_budget():
    assert build_net(12, True, seed=0).parameter_count() <= 500_000


def test_injection_carries_gradient_from_height_loss():
    # the height loss alone must reach edge-stream parameters via the
    # per-level alignment; without injection the streams are independent
    net = build_net(8, True, seed=1)
    h, _ = net(_input(seed=1))
    h.pow(2).mean().backward()
    edge_grads = [p.grad for n, p in net.named_parameters()
                  if n.startswith("edge_dec")]
    assert all(g is not None for g in edge_grads)
    assert any(g.abs().max() > 0 for g in edge_grads)
    align_grads = [p.grad for n, p in net.named_parameters()
                   if n.startswith("align")]
    assert any(g is not None and g.abs().max() > 0 for g in align_grads)

    late = build_net(8, False, seed=1)
    h2, _ = late(_input(seed=1))
    h2.pow(2).mean().backward()
    for n, p in late.named_parameters():
        if n.startswith("edge_dec"):
            assert p.grad is None or p.grad.abs().max() == 0


def test_all_three_branches_are_live():
    # zeroing any concatenated branch at a level must change the output
    net = build_net(8, True, seed=2)
    x = _input(seed=2)
    with torch.no_grad():
        ref, _ = net(x)

    def zero_and_diff(param_prefix):
        save = {}
        with torch.no_grad():
            for n, p in net.named_parameters():
                if n.startswith(param_prefix):
                    save[n] = p.clone()
                    p.zero_()
            out, _ = net(x)
            for n, p in net.named_parameters():
                if n in save:
                    p.copy_(save[n])
        return (out - ref).abs().max().item()

    assert zero_and_diff("align.4") > 0        # injected edge features
    assert zero_and_diff("enc4") > 0           # skip connection
    assert zero_and_diff("enc1") > 0           # upsampled stream from below
    assert zero_and_diff("height_dec.2") > 0   # cascaded height path


def test_no_inject_removes_alignment_parameters():
    net = build_net(8, False, seed=0)
    assert not any(n.startswith("align") for n, _ in net.named_parameters())
    # topology still produces both outputs
    h, e = net(_input())
    assert h.shape == e.shape


def test_forward_deterministic():
    net = build_net(8, True, seed=3)
    x = _input(seed=3)
    with torch.no_grad():
        a, _ = net(x)
        b, _ = net(x)
    assert torch.equal(a, b)
