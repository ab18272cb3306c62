M=(1<<64)-1
def splitmix(state):
    state=(state+0x9E3779B97F4A7C15)&M
    z=state
    z=((z^(z>>30))*0xBF58476D1CE4E5B9)&M
    z=((z^(z>>27))*0x94D049BB133111EB)&M
    return state, z^(z>>31)
def rotl(x,k): return ((x<<k)|(x>>(64-k)))&M
class Xo:
    def __init__(s,seed):
        st=seed; s.s=[]
        for _ in range(4):
            st,v=splitmix(st); s.s.append(v)
    def next(s):
        a=s.s; r=(rotl((a[1]*5)&M,7)*9)&M; t=(a[1]<<17)&M
        a[2]^=a[0]; a[3]^=a[1]; a[1]^=a[2]; a[0]^=a[3]; a[2]^=t; a[3]=rotl(a[3],45); return r
    def uniform(s,n):
        th=((1<<64)-n)%n
        while True:
            r=s.next()
            if r>=th: return r%n
    def shuffle(s,v):
        for i in range(len(v),1,-1):
            j=s.uniform(i); v[i-1],v[j]=v[j],v[i-1]
def schedule(seed, levels=[100,300,600,1000,1500,2000,2500], plats=["vr_plus","vr","pc"], modes=["sc","fc"]):
    r=Xo(seed); out=[]; p=list(plats); r.shuffle(p)
    for pl in p:
        m=list(modes); r.shuffle(m)
        for mo in m:
            l=list(levels); r.shuffle(l)
            out+= [(pl,mo,x) for x in l]
    return out
def fnv(s):
    h=0xCBF29CE484222325
    for c in s.encode(): h^=c; h=(h*0x100000001B3)&M
    return h
x=Xo(0); print("xoshiro seed0 first4", [hex(x.next()) for _ in range(4)])
x=Xo(12345); print("xoshiro seed12345 first3", [x.next() for _ in range(3)])
print("fnv 'pair-1'", fnv("pair-1"))
st=0^fnv("pair-1"); print("pair_seed(0,'pair-1')", splitmix(st)[1])
for seed in [0,42]:
    s=schedule(seed); print("seed",seed); print(",".join(f"{a}/{b}/{c}" for a,b,c in s))
