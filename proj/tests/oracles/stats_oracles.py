import numpy as np, scipy.stats as st, scipy.special as sp, pandas as pd
from statsmodels.stats.anova import AnovaRM
np.set_printoptions(precision=17)
print("t975_4", repr(st.t.ppf(0.975,4)))
print("t975_1", repr(st.t.ppf(0.975,1)), "t975_23", repr(st.t.ppf(0.975,23)), "t995_10", repr(st.t.ppf(0.995,10)))
x=np.array([1,2,3,4,5.]); h=st.t.ppf(0.975,4)*x.std(ddof=1)/np.sqrt(5); print("mos12345", repr(3-h), repr(3+h))
y=np.array([4,4,5,3,4,2,5,4.]);  h=st.t.ppf(0.975,7)*y.std(ddof=1)/np.sqrt(8); print("mos8", repr(y.mean()), repr(y.std(ddof=1)), repr(y.mean()-h), repr(y.mean()+h))
for a,b,xx in [(2,3,0.4),(0.5,0.5,0.3),(10,2,0.9),(1.5,20,0.05),(50,60,0.45)]:
    print("betainc",a,b,xx,repr(sp.betainc(a,b,xx)))
for t,df in [(0.5,3),(-1.2,7),(2.5,10),(4.0,2),(1.96,1000)]:
    print("tcdf",t,df,repr(st.t.cdf(t,df)))
for f,d1,d2 in [(3.0,2,6),(0.5,4,20),(10.0,1,5),(33.99,6,138)]:
    print("fsf",f,d1,d2,repr(st.f.sf(f,d1,d2)))
# paired t, 8 pairs
a=np.array([200,174,198,170,179,182,193,209.]); b=np.array([185,169,173,173,188,186,175,180.])
r=st.ttest_rel(a,b); print("paired8", repr(r.statistic), repr(r.pvalue), repr((a-b).mean()))
# pearson fixed
px=np.array([1.2,2.3,2.9,4.1,5.5,6.0,7.2]); py=np.array([2.0,2.9,3.7,4.0,6.1,5.8,7.9])
print("pearson7", repr(st.pearsonr(px,py)[0]))
# rm anova 4 subjects x 3 levels
D=np.array([[45,50,55],[42,42,45],[36,41,43],[39,35,40.]])
n,k=D.shape; g=D.mean()
sst=((D-g)**2).sum(); sss=k*((D.mean(1)-g)**2).sum(); sse_eff=n*((D.mean(0)-g)**2).sum(); sserr=sst-sss-sse_eff
print("anova SS", repr(sst), repr(sss), repr(sse_eff), repr(sserr))
df=pd.DataFrame([(i,j,D[i,j]) for i in range(n) for j in range(k)],columns=["s","lvl","y"])
res=AnovaRM(df,"y","s",within=["lvl"]).fit().anova_table
print(res.to_string())
F=res["F Value"].iloc[0]; print("anova F",repr(F),"p",repr(res["Pr > F"].iloc[0]),"eta",repr(sse_eff/(sse_eff+sserr)))
# 2-level check
D2=D[:,:2]; r=st.ttest_rel(D2[:,0],D2[:,1]); print("t^2", repr(r.statistic**2))
print("h", repr(2*np.arcsin(1)-2*np.arcsin(np.sqrt(.5))), repr(2*np.arcsin(np.sqrt(.94))-2*np.arcsin(np.sqrt(.5))), repr(2*np.arcsin(np.sqrt(.86))-2*np.arcsin(np.sqrt(.5))))
